//! The optimization loop: GP-UCB, GP-TS and enlarged-variance GP-TS with a
//! pluggable acquisition solver.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    enlarged_variance_offset, ts_build, ts_shift, ucb_shift, Acquisition, AcquisitionSpec,
    BetaKind, BetaSchedule, Ucb,
};
use crate::error::{Error, Result};
use crate::gp::{fit_kernel_on_design, GpPosterior};
use crate::kernels::{KernelFamily, KernelSpec, MaternNu};
use crate::metrics::{eta_hat, info_gain, instantaneous_regret, IterationRecord, RunTrace};
use crate::objectives::{NoiseModel, ObjectiveSpec};
use crate::points::{Bounds, Points};
use crate::rng::{substream, Purpose};
use crate::sobol::{sobol_in_box, MAX_DIM};
use crate::solvers::{
    draw_grid, reference_search, scan_candidates, solve, SolverKind, SolverResult, SolverSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ucb,
    Ts,
    /// Thompson sampling with the marginal scale enlarged by `ṽ_t`.
    TsEnlarged,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ucb => "ucb",
            Algorithm::Ts => "ts",
            Algorithm::TsEnlarged => "ts-enlarged",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucb" => Ok(Algorithm::Ucb),
            "ts" => Ok(Algorithm::Ts),
            "ts-enlarged" => Ok(Algorithm::TsEnlarged),
            _ => Err(Error::input(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// Worst-case solver accuracy `η̃_t` assumed by the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EtaFloor {
    Constant(f64),
    /// `1 − 1/√(t+1)`.
    InverseSqrt,
}

impl EtaFloor {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            EtaFloor::Constant(v) => *v,
            EtaFloor::InverseSqrt => 1.0 - 1.0 / ((t + 1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EtaFloor::Constant(v) if !(*v > 0.0 && *v <= 1.0) => {
                Err(Error::config(format!("η̃ must lie in (0, 1], got {v}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EtaFloor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaFloor::Constant(v) => write!(f, "{v}"),
            EtaFloor::InverseSqrt => f.write_str("inverse-sqrt"),
        }
    }
}

impl FromStr for EtaFloor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inverse-sqrt" {
            return Ok(EtaFloor::InverseSqrt);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::input(format!("invalid η̃ schedule '{s}'")))?;
        let floor = EtaFloor::Constant(v);
        floor.validate()?;
        Ok(floor)
    }
}

/// How the surrogate kernel's hyperparameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFit {
    /// Use `BoConfig::kernel` as given.
    Fixed,
    /// Keep the family of `BoConfig::kernel` and pick lengthscales and output
    /// scale by marginal likelihood on the initial design, once.
    InitDesign,
}

impl KernelFit {
    pub fn name(self) -> &'static str {
        match self {
            KernelFit::Fixed => "fixed",
            KernelFit::InitDesign => "init-design",
        }
    }
}

impl fmt::Display for KernelFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(KernelFit::Fixed),
            "init-design" => Ok(KernelFit::InitDesign),
            _ => Err(Error::input(format!("unknown kernel fit '{s}'"))),
        }
    }
}

/// Everything that determines one run.
#[derive(Debug, Clone)]
pub struct BoConfig {
    pub algorithm: Algorithm,
    pub kernel: KernelSpec,
    pub kernel_fit: KernelFit,
    /// Noise variance `τ` of the surrogate, in surrogate units.
    pub tau: f64,
    pub beta_schedule: BetaSchedule,
    pub solver: SolverSpec,
    /// Required for [`Algorithm::TsEnlarged`]; `η̃ ≡ 1` otherwise.
    pub eta_floor: Option<EtaFloor>,
    pub objective: ObjectiveSpec,
    /// Observation noise in objective units.
    pub noise: NoiseModel,
    pub n_init: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Low-discrepancy points behind the measured `η̂_t`.
    pub oracle_size: usize,
    pub measure_eta: bool,
    /// Bound on `|f|` in surrogate units behind the shifts; defaults to the
    /// objective's [`shift_bound`](ObjectiveSpec::shift_bound).
    pub rkhs_bound: Option<f64>,
    /// `δ` in the Thompson shift.
    pub ts_delta: f64,
    pub scramble_init: bool,
}

/// Default surrogate noise variance for noise-free objectives.
pub const DEFAULT_TAU: f64 = 1e-4;

impl BoConfig {
    /// Matérn-5/2 surrogate with lengthscales from the objective, practical
    /// β, noise-free observations and no η measurement. Benchmarks fit the
    /// kernel on the initial design; synthetic objectives use their
    /// generating kernel.
    pub fn new(
        objective: ObjectiveSpec,
        algorithm: Algorithm,
        solver: SolverSpec,
        n_init: usize,
        iterations: usize,
        seed: u64,
    ) -> Result<Self> {
        let kernel = KernelSpec::new(
            KernelFamily::Matern(MaternNu::FiveHalves),
            objective.default_lengthscales(),
            1.0,
        )?;
        Ok(Self {
            algorithm,
            kernel,
            kernel_fit: if objective.expansion().is_some() {
                KernelFit::Fixed
            } else {
                KernelFit::InitDesign
            },
            tau: DEFAULT_TAU,
            beta_schedule: BetaSchedule::practical(),
            solver,
            eta_floor: None,
            objective,
            noise: NoiseModel::None,
            n_init,
            iterations,
            seed,
            oracle_size: 8192,
            measure_eta: false,
            rkhs_bound: None,
            ts_delta: 0.1,
            scramble_init: true,
        })
    }

    /// Sets Gaussian noise and raises `τ` to at least the noise variance in
    /// surrogate units.
    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        let r = noise.std_dev() / self.objective.value_scale();
        self.tau = self.tau.max(r * r);
        self.noise = noise;
        self
    }

    pub fn shift_bound(&self) -> f64 {
        self.rkhs_bound.unwrap_or_else(|| self.objective.shift_bound())
    }

    pub fn eta_floor_at(&self, t: usize) -> f64 {
        self.eta_floor.map_or(1.0, |f| f.at(t))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::config("n_init must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("the iteration budget must be >= 1"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config("τ must be finite and positive"));
        }
        if self.measure_eta && self.oracle_size == 0 {
            return Err(Error::config("oracle size must be >= 1 when measuring η"));
        }
        if !(self.ts_delta > 0.0 && self.ts_delta < 1.0) {
            return Err(Error::config("Thompson δ must lie in (0, 1)"));
        }
        if let Some(b) = self.rkhs_bound {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::config("RKHS bound must be finite and >= 0"));
            }
        }
        self.kernel
            .check_dim(self.objective.dim())
            .map_err(|e| Error::config(e.to_string()))?;
        self.beta_schedule.validate()?;
        self.solver.validate()?;
        self.noise.validate()?;
        if let Some(f) = &self.eta_floor {
            f.validate()?;
        }
        match self.algorithm {
            Algorithm::Ucb => {}
            Algorithm::Ts | Algorithm::TsEnlarged => {
                if !self.solver.is_grid() {
                    return Err(Error::config(
                        "Thompson sampling draws on a grid; pick a grid solver",
                    ));
                }
            }
        }
        if self.algorithm == Algorithm::TsEnlarged {
            if self.eta_floor.is_none() {
                return Err(Error::config("ts-enlarged needs an η̃ schedule"));
            }
            if !(self.shift_bound() > 0.0) {
                return Err(Error::config("ts-enlarged needs B > 0"));
            }
        }
        Ok(())
    }

    /// Resolved settings and interpretation flags recorded with every run.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("algorithm", self.algorithm.to_string());
        put("objective", self.objective.name().to_string());
        put("kernel", format!("{:?}", self.kernel.family()));
        put("lengthscales", format!("{:?}", self.kernel.lengthscales()));
        put("output_scale", self.kernel.output_scale().to_string());
        put("kernel_fit", self.kernel_fit.to_string());
        put("tau", self.tau.to_string());
        put(
            "beta_schedule",
            match self.beta_schedule.kind {
                BetaKind::Practical => "practical sqrt(log(t+2))".to_string(),
                BetaKind::Theoretical => format!(
                    "theoretical B={} R={} delta={} divisor={}",
                    self.beta_schedule.rkhs_bound,
                    self.beta_schedule.noise_scale,
                    self.beta_schedule.delta,
                    self.beta_schedule.delta_divisor
                ),
            },
        );
        put("solver", self.solver.label().to_string());
        put("grid_coefficient", self.solver.grid_coefficient.to_string());
        put("grid_exponent", self.solver.grid_exponent.to_string());
        put("fixed_size", self.solver.fixed_size.to_string());
        put("n_starts", self.solver.n_starts.to_string());
        put("max_inner_iters", self.solver.max_inner_iters.to_string());
        put("inner_tol", self.solver.inner_tol.to_string());
        put("eta_floor", self.eta_floor.map_or("1".into(), |f| f.to_string()));
        put("noise", format!("{:?}", self.noise));
        put("n_init", self.n_init.to_string());
        put("iterations", self.iterations.to_string());
        put("seed", self.seed.to_string());
        put("measure_eta", self.measure_eta.to_string());
        put("oracle_size", self.oracle_size.to_string());
        put("shift_bound", self.shift_bound().to_string());
        put("ts_delta", self.ts_delta.to_string());
        put("value_offset", self.objective.value_offset().to_string());
        put("value_scale", self.objective.value_scale().to_string());
        put("init_design", if self.scramble_init { "sobol-shifted" } else { "sobol" }.into());
        put("information_gain", "realized".into());
        put("ts_joint_law", "posterior-correlation-rescaled".into());
        put("eta_reference", "sobol-oracle+solver-point+quasi-newton-polish".into());
        put("regret_counts_init", "false".into());
        put("jitter_ladder", "0,1e-10,1e-8,1e-6".into());
        m
    }
}

/// First `n_init` Sobol points mapped into `domain`, optionally digitally
/// shifted by `seed`. Falls back to uniform draws above the Sobol table's
/// dimension limit.
pub fn init_design(domain: &Bounds, n_init: usize, seed: u64, scramble: bool) -> Result<Points> {
    if n_init == 0 {
        return Err(Error::input("n_init must be >= 1"));
    }
    if domain.dim() > MAX_DIM {
        return Ok(domain.sample_points(n_init, &mut substream(seed, Purpose::InitDesign, 1)));
    }
    sobol_in_box(domain, n_init, scramble.then_some(seed))
}

/// Read-only view of one iteration, handed to [`run_bo_inspect`] observers
/// before the posterior is updated.
pub struct IterationView<'a> {
    pub t: usize,
    pub posterior: &'a GpPosterior,
    pub acquisition: &'a dyn Acquisition,
    pub result: &'a SolverResult,
    pub beta: f64,
}

pub fn run_bo(cfg: &BoConfig) -> Result<RunTrace> {
    run_bo_inspect(cfg, |_| {})
}

/// [`run_bo`] with a callback invoked once per iteration.
pub fn run_bo_inspect<F>(cfg: &BoConfig, mut observe: F) -> Result<RunTrace>
where
    F: FnMut(&IterationView<'_>),
{
    cfg.validate()?;
    let obj = &cfg.objective;
    let domain = obj.domain();
    let bound = cfg.shift_bound();

    let x0 = init_design(domain, cfg.n_init, cfg.seed, cfg.scramble_init)?;
    let mut noise_rng = substream(cfg.seed, Purpose::Noise, 0);
    let mut y0 = Vec::with_capacity(x0.len());
    for x in x0.iter() {
        y0.push(obj.to_model(obj.observe(&cfg.noise, x, &mut noise_rng)?));
    }
    let kernel = match cfg.kernel_fit {
        KernelFit::Fixed => cfg.kernel.clone(),
        KernelFit::InitDesign => {
            fit_kernel_on_design(&cfg.kernel, &domain.widths(), &x0, &y0, cfg.tau)?
        }
    };
    let mut metadata = cfg.metadata();
    metadata.insert("lengthscales".into(), format!("{:?}", kernel.lengthscales()));
    metadata.insert("output_scale".into(), kernel.output_scale().to_string());
    let mut gp = GpPosterior::new(kernel, cfg.tau, x0, &y0)?;

    let mut records = Vec::with_capacity(cfg.iterations);
    let mut cum = 0.0;
    for t in 1..=cfg.iterations {
        let mut step = || -> Result<(IterationRecord, Vec<f64>, f64)> {
            let beta = cfg.beta_schedule.beta(t, info_gain(&gp));
            let eta_floor = cfg.eta_floor_at(t);
            let stream = if cfg.solver.is_grid() {
                Purpose::SolverGrid
            } else {
                Purpose::SolverStarts
            };
            let mut solver_rng = substream(cfg.seed, stream, t as u64);

            let build_start = Instant::now();
            let acq = match cfg.algorithm {
                Algorithm::Ucb => AcquisitionSpec::Ucb(Ucb::new(&gp, beta, ucb_shift(bound))?),
                Algorithm::Ts | Algorithm::TsEnlarged => {
                    let v = if cfg.algorithm == Algorithm::TsEnlarged {
                        enlarged_variance_offset(eta_floor, bound)?
                    } else {
                        0.0
                    };
                    let size = cfg.solver.grid_size(t).expect("validated grid solver");
                    let grid = draw_grid(domain, size, &mut solver_rng);
                    let mut draw_rng = substream(cfg.seed, Purpose::ThompsonDraw, t as u64);
                    let ts = ts_build(&gp, grid, beta, v, &mut draw_rng)?;
                    let shift = ts_shift(size, cfg.ts_delta, beta, v, bound);
                    AcquisitionSpec::Thompson(ts.with_shift(shift))
                }
            };
            let build_time = build_start.elapsed();

            let res = match &acq {
                AcquisitionSpec::Ucb(u) => solve(&cfg.solver, u, domain, t, &mut solver_rng)?,
                AcquisitionSpec::Thompson(ts) => scan_candidates(ts, ts.grid().clone())?,
            };

            // α* for a Thompson sample is its grid maximum, which the scan
            // attains; the oracle solver is its own reference.
            let reference = if !cfg.measure_eta {
                None
            } else if matches!(acq, AcquisitionSpec::Thompson(_))
                || cfg.solver.kind == SolverKind::ReferenceOracle
            {
                Some(res.acq_value)
            } else {
                let chosen = Points::from_flat(domain.dim(), res.x_chosen.clone())?;
                let mut oracle_rng = substream(cfg.seed, Purpose::Oracle, t as u64);
                let r = reference_search(&acq, domain, cfg.oracle_size, Some(&chosen), &mut oracle_rng)?;
                Some(r.raw_value + acq.shift())
            };

            observe(&IterationView {
                t,
                posterior: &gp,
                acquisition: &acq,
                result: &res,
                beta,
            });

            let f_x = obj.evaluate(&res.x_chosen)?;
            let y = f_x + cfg.noise.draw(&mut noise_rng);
            let regret = instantaneous_regret(obj.f_star(), f_x);
            let record = IterationRecord {
                t,
                x: res.x_chosen.clone(),
                y,
                f_x,
                regret,
                cum_regret: 0.0,
                eta_hat: reference.map(|r| eta_hat(res.acq_value, r)),
                eta_floor,
                beta,
                gamma: 0.0,
                shift: acq.shift(),
                acq_value: res.acq_value,
                reference_value: reference,
                build_time,
                solve_time: res.wall_time,
                n_evals: res.n_evals,
            };
            Ok((record, res.x_chosen, y))
        };
        let (mut record, x, y) = step().map_err(|e| e.at_iteration(t))?;
        gp.update_in_place(&x, obj.to_model(y))
            .map_err(|e| e.at_iteration(t))?;
        cum += record.regret;
        record.cum_regret = cum;
        record.gamma = info_gain(&gp);
        records.push(record);
    }

    Ok(RunTrace {
        function: obj.name().to_string(),
        algorithm: cfg.algorithm.to_string(),
        solver: cfg.solver.label().to_string(),
        seed: cfg.seed,
        f_star: obj.f_star(),
        domain: domain.clone(),
        records,
        metadata,
    })
}

/// Traces of the replicates that finished, and the failures of those that
/// did not, both ordered by replicate index.
#[derive(Debug)]
pub struct ReplicateOutcome {
    pub traces: Vec<(usize, RunTrace)>,
    pub failures: Vec<(usize, Error)>,
}

/// Runs replicate `i` with seed `cfg.seed + i` for `i < n_reps` on a pool
/// of `parallelism` threads.
pub fn run_replicates(cfg: &BoConfig, n_reps: usize, parallelism: usize) -> Result<ReplicateOutcome> {
    if n_reps == 0 {
        return Err(Error::config("n_reps must be >= 1"));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunTrace>> = pool.install(|| {
        (0..n_reps)
            .into_par_iter()
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed.wrapping_add(i as u64);
                run_bo(&c)
            })
            .collect()
    });
    let mut out = ReplicateOutcome {
        traces: Vec::new(),
        failures: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => out.traces.push((i, t)),
            Err(e) => out.failures.push((i, e)),
        }
    }
    Ok(out)
}
