//! Experiment plans in a sectioned `key = value` text format.
//!
//! ```text
//! [plan]
//! name = demo
//! seed = 0
//!
//! [experiment branin-grid]
//! objective = branin
//! algorithm = ucb
//! solver = uniform-grid
//! iterations = 80
//! n_reps = 20
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gridbo::acquisition::BetaSchedule;
use gridbo::engine::{Algorithm, BoConfig, EtaFloor, KernelFit};
use gridbo::objectives::{NoiseModel, ObjectiveKind, ObjectiveSpec, SyntheticParams};
use gridbo::solvers::{AscentRule, SolverKind, SolverSpec};
use gridbo::{KernelFamily, KernelSpec, MaternNu};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct PlanError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> PlanError {
    PlanError {
        line: Some(line),
        message: message.into(),
    }
}

type Check = fn(&str) -> Result<(), String>;

fn parse_as<T: FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("expected {what}, got '{v}'"))
}

fn any_count(v: &str) -> Result<(), String> {
    parse_as::<usize>(v, "a nonnegative integer").map(drop)
}

fn count(v: &str) -> Result<(), String> {
    match parse_as::<usize>(v, "a positive integer")? {
        0 => Err("must be >= 1".into()),
        _ => Ok(()),
    }
}

fn seed(v: &str) -> Result<(), String> {
    parse_as::<u64>(v, "an unsigned 64-bit integer").map(drop)
}

fn positive(v: &str) -> Result<(), String> {
    let x: f64 = parse_as(v, "a number")?;
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(format!("must be finite and > 0, got {v}"))
    }
}

fn nonnegative(v: &str) -> Result<(), String> {
    let x: f64 = parse_as(v, "a number")?;
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(format!("must be finite and >= 0, got {v}"))
    }
}

fn open_unit(v: &str) -> Result<(), String> {
    let x: f64 = parse_as(v, "a number")?;
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

fn boolean(v: &str) -> Result<(), String> {
    parse_as::<bool>(v, "true or false").map(drop)
}

fn objective(v: &str) -> Result<(), String> {
    ObjectiveKind::from_str(v).map(drop).map_err(|e| e.to_string())
}

fn algorithm(v: &str) -> Result<(), String> {
    Algorithm::from_str(v).map(drop).map_err(|e| e.to_string())
}

fn solver(v: &str) -> Result<(), String> {
    solver_kind(v).map(drop)
}

fn eta_floor(v: &str) -> Result<(), String> {
    EtaFloor::from_str(v).map(drop).map_err(|e| e.to_string())
}

fn beta(v: &str) -> Result<(), String> {
    match v {
        "practical" | "theoretical" => Ok(()),
        _ => Err(format!("expected practical or theoretical, got '{v}'")),
    }
}

fn delta_divisor(v: &str) -> Result<(), String> {
    match parse_as::<u8>(v, "1, 2 or 3")? {
        1..=3 => Ok(()),
        _ => Err(format!("expected 1, 2 or 3, got {v}")),
    }
}

fn noise(v: &str) -> Result<(), String> {
    match v {
        "none" | "auto" => Ok(()),
        _ => nonnegative(v).map_err(|e| format!("expected none, auto or a standard deviation: {e}")),
    }
}

fn kernel(v: &str) -> Result<(), String> {
    kernel_family(v).map(drop)
}

fn kernel_fit(v: &str) -> Result<(), String> {
    KernelFit::from_str(v).map(drop).map_err(|e| e.to_string())
}

/// Keys accepted in `[experiment ...]` sections, in serialization order.
const EXPERIMENT_KEYS: &[(&str, Check)] = &[
    ("objective", objective),
    ("algorithm", algorithm),
    ("solver", solver),
    ("iterations", count),
    ("n_reps", count),
    ("n_init", count),
    ("grid_coefficient", count),
    ("grid_exponent", positive),
    ("fixed_size", count),
    ("n_starts", count),
    ("max_inner_iters", any_count),
    ("inner_tol", positive),
    ("oracle_size", count),
    ("measure_eta", boolean),
    ("beta", beta),
    ("beta_b", nonnegative),
    ("beta_r", nonnegative),
    ("beta_delta", open_unit),
    ("beta_delta_divisor", delta_divisor),
    ("eta_floor", eta_floor),
    ("noise", noise),
    ("tau", positive),
    ("kernel", kernel),
    ("kernel_fit", kernel_fit),
    ("lengthscale", positive),
    ("output_scale", positive),
    ("rkhs_bound", nonnegative),
    ("ts_delta", open_unit),
    ("scramble_init", boolean),
    ("objective_seed", seed),
    ("synthetic_dim", count),
    ("synthetic_centers", count),
    ("synthetic_bound", positive),
    ("synthetic_lengthscale", positive),
];

const REQUIRED_KEYS: &[&str] = &["objective", "algorithm", "solver", "iterations", "n_reps"];

fn check_key(key: &str) -> Option<Check> {
    EXPERIMENT_KEYS.iter().find(|(k, _)| *k == key).map(|(_, c)| *c)
}

fn key_rank(key: &str) -> usize {
    EXPERIMENT_KEYS.iter().position(|(k, _)| *k == key).unwrap_or(usize::MAX)
}

/// Maps a solver label to its kind and ascent rule.
pub fn solver_kind(label: &str) -> Result<(SolverKind, AscentRule), String> {
    Ok(match label {
        "uniform-grid" => (SolverKind::UniformGrid, AscentRule::Steepest),
        "fixed-grid" => (SolverKind::FixedGrid, AscentRule::Steepest),
        "simplex-multistart" => (SolverKind::MultiStartSimplex, AscentRule::Steepest),
        "gradient-multistart" => (SolverKind::MultiStartGradient, AscentRule::Steepest),
        "quasi-newton-multistart" => (SolverKind::MultiStartGradient, AscentRule::QuasiNewton),
        "reference-oracle" => (SolverKind::ReferenceOracle, AscentRule::Steepest),
        _ => return Err(format!("unknown solver '{label}'")),
    })
}

fn kernel_family(name: &str) -> Result<KernelFamily, String> {
    Ok(match name {
        "se" => KernelFamily::SquaredExponential,
        "matern32" => KernelFamily::Matern(MaternNu::ThreeHalves),
        "matern52" => KernelFamily::Matern(MaternNu::FiveHalves),
        "matern72" => KernelFamily::Matern(MaternNu::SevenHalves),
        _ => return Err(format!("unknown kernel '{name}' (se, matern32, matern52, matern72)")),
    })
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// One `[experiment <id>]` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Experiment {
    pub id: String,
    pub settings: BTreeMap<String, String>,
}

impl Experiment {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            settings: BTreeMap::new(),
        }
    }

    /// Sets `key`, checking both the key and the value.
    pub fn set(mut self, key: &str, value: impl ToString) -> Result<Self, PlanError> {
        let value = value.to_string();
        let check = check_key(key).ok_or_else(|| PlanError {
            line: None,
            message: format!("unknown key '{key}'"),
        })?;
        check(&value).map_err(|m| PlanError {
            line: None,
            message: format!("{key}: {m}"),
        })?;
        self.settings.insert(key.to_string(), value);
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.settings.get(key).map(String::as_str)
    }

    fn num<T: FromStr>(&self, key: &str) -> Option<T> {
        // values were checked on insertion
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn n_reps(&self) -> usize {
        self.num("n_reps").unwrap_or(1)
    }

    /// Builds the objective this experiment names.
    pub fn objective(&self) -> gridbo::Result<ObjectiveSpec> {
        let kind = ObjectiveKind::from_str(self.get("objective").unwrap_or(""))?;
        let defaults = SyntheticParams::default();
        let synthetic = SyntheticParams {
            dim: self.num("synthetic_dim").unwrap_or(defaults.dim),
            n_centers: self.num("synthetic_centers").unwrap_or(defaults.n_centers),
            rkhs_bound: self.num("synthetic_bound").unwrap_or(defaults.rkhs_bound),
            lengthscale: self.num("synthetic_lengthscale"),
            seed: self.num("objective_seed").unwrap_or(defaults.seed),
        };
        ObjectiveSpec::build(kind, &synthetic)
    }

    /// Fully resolved configuration for replicate seed `seed`, using a
    /// prebuilt objective.
    pub fn config_with(&self, objective: ObjectiveSpec, seed: u64) -> Result<BoConfig, String> {
        for key in REQUIRED_KEYS {
            if self.get(key).is_none() {
                return Err(format!("experiment '{}' is missing required key '{key}'", self.id));
            }
        }
        let d = objective.dim();
        let algorithm = Algorithm::from_str(self.get("algorithm").unwrap_or("")).map_err(|e| e.to_string())?;
        let (kind, ascent) = solver_kind(self.get("solver").unwrap_or(""))?;
        let mut solver = SolverSpec::defaults(kind, d);
        solver.ascent = ascent;
        if let Some(c) = self.num("grid_coefficient") {
            solver.grid_coefficient = c;
        }
        if let Some(p) = self.num("grid_exponent") {
            solver.grid_exponent = p;
        }
        if let Some(m) = self.num("fixed_size") {
            solver.fixed_size = m;
        }
        if let Some(n) = self.num("n_starts") {
            solver.n_starts = n;
        }
        if let Some(n) = self.num("max_inner_iters") {
            solver.max_inner_iters = n;
        }
        if let Some(tol) = self.num("inner_tol") {
            solver.inner_tol = tol;
        }
        if let Some(n) = self.num("oracle_size") {
            solver.oracle_size = n;
        }
        let n_init = self.num("n_init").unwrap_or(10 * d);
        let iterations = self.num("iterations").unwrap_or(0);
        let value_range = objective.value_range();
        let mut cfg = BoConfig::new(objective, algorithm, solver, n_init, iterations, seed)
            .map_err(|e| e.to_string())?;

        let family = match self.get("kernel") {
            Some(k) => kernel_family(k)?,
            None => cfg.kernel.family(),
        };
        let lengthscales = match self.num::<f64>("lengthscale") {
            Some(l) => vec![l],
            None => cfg.kernel.lengthscales().to_vec(),
        };
        let output_scale = self.num("output_scale").unwrap_or(cfg.kernel.output_scale());
        cfg.kernel = KernelSpec::new(family, lengthscales, output_scale).map_err(|e| e.to_string())?;
        if self.get("lengthscale").is_some() || self.get("output_scale").is_some() {
            cfg.kernel_fit = KernelFit::Fixed;
        }
        if let Some(f) = self.get("kernel_fit") {
            cfg.kernel_fit = KernelFit::from_str(f).map_err(|e| e.to_string())?;
        }
        if let Some(tau) = self.num("tau") {
            cfg.tau = tau;
        }
        match self.get("noise") {
            None | Some("none") => {}
            Some("auto") => cfg = cfg.with_noise(NoiseModel::Gaussian(0.01 * value_range)),
            Some(r) => {
                let r: f64 = parse_as(r, "a standard deviation")?;
                if r > 0.0 {
                    cfg = cfg.with_noise(NoiseModel::Gaussian(r));
                }
            }
        }
        if let Some(b) = self.num("rkhs_bound") {
            cfg.rkhs_bound = Some(b);
        }
        if let Some(delta) = self.num("ts_delta") {
            cfg.ts_delta = delta;
        }
        if self.get("beta") == Some("theoretical") {
            let default_divisor = match (algorithm, cfg.solver.is_grid()) {
                (Algorithm::Ucb, false) => 1,
                (Algorithm::Ucb, true) => 2,
                _ => 3,
            };
            cfg.beta_schedule = BetaSchedule::theoretical(
                self.num("beta_b").unwrap_or_else(|| cfg.shift_bound()),
                self.num("beta_r").unwrap_or_else(|| cfg.tau.sqrt()),
                self.num("beta_delta").unwrap_or(0.1),
                self.num("beta_delta_divisor").unwrap_or(default_divisor),
            );
        }
        if let Some(f) = self.get("eta_floor") {
            cfg.eta_floor = Some(EtaFloor::from_str(f).map_err(|e| e.to_string())?);
        }
        if let Some(m) = self.num("measure_eta") {
            cfg.measure_eta = m;
        }
        if let Some(n) = self.num("oracle_size") {
            cfg.oracle_size = n;
        }
        if let Some(s) = self.num("scramble_init") {
            cfg.scramble_init = s;
        }
        cfg.validate().map_err(|e| format!("experiment '{}': {e}", self.id))?;
        Ok(cfg)
    }

    /// Fully resolved configuration for replicate seed `seed`.
    pub fn config(&self, seed: u64) -> Result<BoConfig, String> {
        let objective = self
            .objective()
            .map_err(|e| format!("experiment '{}': {e}", self.id))?;
        self.config_with(objective, seed)
    }

    fn write_section(&self, out: &mut String) {
        let _ = writeln!(out, "[experiment {}]", self.id);
        let mut keys: Vec<&String> = self.settings.keys().collect();
        keys.sort_by_key(|k| key_rank(k));
        for k in keys {
            let _ = writeln!(out, "{k} = {}", self.settings[k]);
        }
    }

    /// Hex digest identifying this experiment's settings, used to key
    /// completed runs on disk.
    pub fn digest(&self) -> String {
        let mut text = format!("gridbo {}\n", env!("CARGO_PKG_VERSION"));
        self.write_section(&mut text);
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentPlan {
    pub name: String,
    /// Base seed; replicate `i` of every experiment uses `seed + i`.
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

impl ExperimentPlan {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            seed,
            output: None,
            experiments: Vec::new(),
        }
    }

    /// Parses plan text, checking structure, keys and individual values.
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        Ok(Self::parse_unchecked(text)?.0)
    }

    /// Parses plan text and checks that every experiment resolves to a valid
    /// configuration.
    pub fn parse_and_validate(text: &str) -> Result<Self, PlanError> {
        let (plan, lines) = Self::parse_unchecked(text)?;
        for (e, line) in plan.experiments.iter().zip(lines) {
            e.config(plan.seed).map_err(|m| err(line, m))?;
        }
        Ok(plan)
    }

    pub fn read(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse_and_validate(&text)
    }

    /// Syntax and per-key checks; returns the header line of every
    /// experiment alongside the plan.
    fn parse_unchecked(text: &str) -> Result<(Self, Vec<usize>), PlanError> {
        enum Section {
            None,
            Plan,
            Experiment,
        }
        let mut plan = ExperimentPlan::new("", 0);
        let mut name = None;
        let mut seed_seen = false;
        let mut section = Section::None;
        let mut seen_plan = false;
        let mut headers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(inner) = s.strip_prefix('[') {
                let inner = inner
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim();
                if inner == "plan" {
                    if seen_plan {
                        return Err(err(line, "duplicate [plan] section"));
                    }
                    seen_plan = true;
                    section = Section::Plan;
                } else if let Some(id) = inner.strip_prefix("experiment ") {
                    let id = id.trim();
                    if !valid_id(id) {
                        return Err(err(line, format!("invalid experiment id '{id}'")));
                    }
                    if plan.experiments.iter().any(|e| e.id == id) {
                        return Err(err(line, format!("duplicate experiment id '{id}'")));
                    }
                    plan.experiments.push(Experiment::new(id));
                    headers.push(line);
                    section = Section::Experiment;
                } else {
                    return Err(err(line, format!("unknown section '[{inner}]'")));
                }
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| err(line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(line, format!("key '{key}' has no value")));
            }
            match section {
                Section::None => return Err(err(line, "setting outside of any section")),
                Section::Plan => match key {
                    "name" => {
                        if name.replace(value.to_string()).is_some() {
                            return Err(err(line, "duplicate key 'name'"));
                        }
                    }
                    "seed" => {
                        if seed_seen {
                            return Err(err(line, "duplicate key 'seed'"));
                        }
                        plan.seed = parse_as(value, "an unsigned 64-bit integer").map_err(|m| err(line, m))?;
                        seed_seen = true;
                    }
                    "output" => {
                        if plan.output.replace(PathBuf::from(value)).is_some() {
                            return Err(err(line, "duplicate key 'output'"));
                        }
                    }
                    _ => return Err(err(line, format!("unknown plan key '{key}'"))),
                },
                Section::Experiment => {
                    let check =
                        check_key(key).ok_or_else(|| err(line, format!("unknown experiment key '{key}'")))?;
                    check(value).map_err(|m| err(line, format!("{key}: {m}")))?;
                    let exp = plan.experiments.last_mut().expect("inside an experiment");
                    if exp.settings.insert(key.to_string(), value.to_string()).is_some() {
                        return Err(err(line, format!("duplicate key '{key}'")));
                    }
                }
            }
        }
        if !seen_plan {
            return Err(PlanError {
                line: None,
                message: "missing [plan] section".into(),
            });
        }
        plan.name = name.ok_or_else(|| PlanError {
            line: None,
            message: "[plan] is missing required key 'name'".into(),
        })?;
        for (e, &line) in plan.experiments.iter().zip(&headers) {
            for key in REQUIRED_KEYS {
                if e.get(key).is_none() {
                    return Err(err(line, format!("experiment '{}' is missing required key '{key}'", e.id)));
                }
            }
        }
        Ok((plan, headers))
    }

    /// Canonical text; `parse(serialize(p)) == p`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[plan]\nname = {}\nseed = {}", self.name, self.seed);
        if let Some(o) = &self.output {
            let _ = writeln!(out, "output = {}", o.display());
        }
        for e in &self.experiments {
            out.push('\n');
            e.write_section(&mut out);
        }
        out
    }

    pub fn total_runs(&self) -> usize {
        self.experiments.iter().map(Experiment::n_reps).sum()
    }
}

/// Iteration budgets per benchmark: `(n_init, T)`.
pub const BENCHMARK_BUDGETS: [(ObjectiveKind, usize, usize); 6] = [
    (ObjectiveKind::Branin, 20, 80),
    (ObjectiveKind::Rastrigin3, 30, 100),
    (ObjectiveKind::Hartmann3, 30, 100),
    (ObjectiveKind::Hartmann4, 40, 100),
    (ObjectiveKind::Levy5, 50, 150),
    (ObjectiveKind::Hartmann6, 60, 200),
];

/// The four solvers compared on the benchmark suite.
pub const BENCHMARK_SOLVERS: [&str; 4] = [
    "uniform-grid",
    "quasi-newton-multistart",
    "simplex-multistart",
    "gradient-multistart",
];

/// Names and one-line descriptions of the built-in plans.
pub const BUILTIN_PLANS: [(&str, &str); 6] = [
    ("paper-sec5", "six benchmarks x four UCB solvers, 20 replicates, n_init = 10d"),
    ("paper-appB-fixedgrid", "11-d synthetic RKHS task: grid of 100t points vs a fixed grid of 100"),
    ("paper-appB-smallinit", "paper-sec5 with n_init = 5d"),
    ("ledger-study", "benchmark solvers with the accuracy oracle on, 5 replicates"),
    ("sublinearity", "random-grid UCB and TS on branin and hartmann3, 20 replicates"),
    ("smoke", "two short branin runs per solver for quick checks"),
];

fn benchmark_suite(name: &str, reps: usize, init_per_dim: Option<usize>, measure_eta: bool) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(name, 0);
    for (kind, n_init, t) in BENCHMARK_BUDGETS {
        let d = ObjectiveSpec::benchmark(kind).map(|o| o.dim()).unwrap_or(1);
        let n_init = init_per_dim.map_or(n_init, |k| k * d);
        for solver in BENCHMARK_SOLVERS {
            let mut e = Experiment::new(format!("{}-{}", kind.name(), solver));
            for (k, v) in [
                ("objective", kind.name().to_string()),
                ("algorithm", "ucb".into()),
                ("solver", solver.into()),
                ("iterations", t.to_string()),
                ("n_reps", reps.to_string()),
                ("n_init", n_init.to_string()),
            ] {
                e.settings.insert(k.into(), v);
            }
            if measure_eta {
                e.settings.insert("measure_eta".into(), "true".into());
            }
            plan.experiments.push(e);
        }
    }
    plan
}

fn entry(id: &str, pairs: &[(&str, &str)]) -> Experiment {
    let mut e = Experiment::new(id);
    for (k, v) in pairs {
        e.settings.insert(k.to_string(), v.to_string());
    }
    e
}

/// A built-in plan by name.
pub fn builtin_plan(name: &str) -> Option<ExperimentPlan> {
    Some(match name {
        "paper-sec5" => benchmark_suite(name, 20, None, false),
        "paper-appB-smallinit" => benchmark_suite(name, 20, Some(5), false),
        "ledger-study" => benchmark_suite(name, 5, None, true),
        "paper-appB-fixedgrid" => {
            let mut plan = ExperimentPlan::new(name, 0);
            let common = [
                ("objective", "synthetic-rkhs"),
                ("algorithm", "ucb"),
                ("iterations", "100"),
                ("n_reps", "20"),
                ("n_init", "110"),
            ];
            let mut a = entry("synthetic-rkhs-uniform-grid", &common);
            a.settings.insert("solver".into(), "uniform-grid".into());
            let mut b = entry("synthetic-rkhs-fixed-grid", &common);
            b.settings.insert("solver".into(), "fixed-grid".into());
            b.settings.insert("fixed_size".into(), "100".into());
            plan.experiments.extend([a, b]);
            plan
        }
        "sublinearity" => {
            let mut plan = ExperimentPlan::new(name, 0);
            for (kind, n_init, t) in &BENCHMARK_BUDGETS[..] {
                if !matches!(kind, ObjectiveKind::Branin | ObjectiveKind::Hartmann3) {
                    continue;
                }
                let (n_init, t) = (n_init.to_string(), t.to_string());
                let base = [
                    ("objective", kind.name()),
                    ("solver", "uniform-grid"),
                    ("iterations", t.as_str()),
                    ("n_reps", "20"),
                    ("n_init", n_init.as_str()),
                ];
                let mut ucb = entry(&format!("{}-ucb-uniform-grid", kind.name()), &base);
                ucb.settings.insert("algorithm".into(), "ucb".into());
                let mut ts = entry(&format!("{}-ts-uniform-grid", kind.name()), &base);
                ts.settings.insert("algorithm".into(), "ts".into());
                ts.settings.insert("grid_coefficient".into(), "10".into());
                plan.experiments.extend([ucb, ts]);
            }
            plan
        }
        "smoke" => {
            let mut plan = ExperimentPlan::new(name, 0);
            for solver in BENCHMARK_SOLVERS {
                plan.experiments.push(entry(
                    &format!("branin-{solver}"),
                    &[
                        ("objective", "branin"),
                        ("algorithm", "ucb"),
                        ("solver", solver),
                        ("iterations", "10"),
                        ("n_reps", "2"),
                        ("n_init", "5"),
                    ],
                ));
            }
            plan.experiments.push(entry(
                "branin-ts-uniform-grid",
                &[
                    ("objective", "branin"),
                    ("algorithm", "ts"),
                    ("solver", "uniform-grid"),
                    ("grid_coefficient", "10"),
                    ("iterations", "10"),
                    ("n_reps", "2"),
                    ("n_init", "5"),
                ],
            ));
            plan
        }
        _ => return None,
    })
}

/// Loads `spec` as a plan file if it exists, otherwise as a built-in name.
pub fn load_plan(spec: &str) -> Result<ExperimentPlan, PlanError> {
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentPlan::read(path);
    }
    builtin_plan(spec).ok_or_else(|| PlanError {
        line: None,
        message: format!("'{spec}' is neither a plan file nor a built-in plan"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
[plan]
name = sample
seed = 7

[experiment a]
objective = branin
algorithm = ucb
solver = uniform-grid
iterations = 5
n_reps = 2
grid_coefficient = 20
";

    #[test]
    fn parses_sample() {
        let p = ExperimentPlan::parse_and_validate(SAMPLE).unwrap();
        assert_eq!(p.name, "sample");
        assert_eq!(p.seed, 7);
        assert_eq!(p.experiments.len(), 1);
        let cfg = p.experiments[0].config(p.seed).unwrap();
        assert_eq!(cfg.solver.grid_coefficient, 20);
        assert_eq!(cfg.n_init, 20);
        assert_eq!(cfg.kernel_fit, KernelFit::InitDesign);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            (SAMPLE.replace("grid_coefficient = 20", "grid_coeficient = 20"), 12, "unknown experiment key"),
            (SAMPLE.replace("n_reps = 2", "n_reps = 0"), 11, "must be >= 1"),
            (SAMPLE.replace("solver = uniform-grid\n", ""), 6, "missing required key 'solver'"),
            (SAMPLE.replace("seed = 7", "seed = -1"), 4, "unsigned"),
            (SAMPLE.replace("[experiment a]", "[experimnt a]"), 6, "unknown section"),
            (
                SAMPLE
                    .replace("algorithm = ucb", "algorithm = ts")
                    .replace("solver = uniform-grid", "solver = simplex-multistart"),
                6,
                "grid solver",
            ),
        ];
        for (text, line, needle) in cases {
            let e = ExperimentPlan::parse_and_validate(&text).unwrap_err();
            assert_eq!(e.line, Some(line), "{e}");
            assert!(e.message.contains(needle), "{e}");
        }
    }

    #[test]
    fn rejects_structural_mistakes() {
        assert!(ExperimentPlan::parse("objective = branin").is_err());
        assert!(ExperimentPlan::parse("[plan]\nseed = 1").is_err());
        let dup = format!("{SAMPLE}\n[experiment a]\nobjective = branin");
        assert!(ExperimentPlan::parse(&dup).unwrap_err().message.contains("duplicate"));
    }

    #[test]
    fn empty_plan_is_valid() {
        let p = ExperimentPlan::parse_and_validate("[plan]\nname = empty\n").unwrap();
        assert!(p.experiments.is_empty());
        assert_eq!(p.total_runs(), 0);
    }

    #[test]
    fn benchmark_plan_matches_protocol() {
        let p = builtin_plan("paper-sec5").unwrap();
        assert_eq!(p.experiments.len(), 24);
        assert_eq!(p.total_runs(), 480);
        let budgets: Vec<(String, usize, usize)> = p
            .experiments
            .iter()
            .filter(|e| e.get("solver") == Some("uniform-grid"))
            .map(|e| {
                let c = e.config(0).unwrap();
                (c.objective.name().to_string(), c.n_init, c.iterations)
            })
            .collect();
        let expected = [
            ("branin", 20, 80),
            ("rastrigin3", 30, 100),
            ("hartmann3", 30, 100),
            ("hartmann4", 40, 100),
            ("levy5", 50, 150),
            ("hartmann6", 60, 200),
        ];
        for (got, want) in budgets.iter().zip(expected) {
            assert_eq!((got.0.as_str(), got.1, got.2), want);
        }
        for e in &p.experiments {
            let c = e.config(0).unwrap();
            assert_eq!(c.n_init, 10 * c.objective.dim());
        }
    }

    #[test]
    fn ablation_plans() {
        let fixed = builtin_plan("paper-appB-fixedgrid").unwrap();
        let sizes: Vec<Option<usize>> = fixed
            .experiments
            .iter()
            .map(|e| e.config(0).unwrap().solver.grid_size(50))
            .collect();
        assert_eq!(sizes, vec![Some(5000), Some(100)]);
        let small = builtin_plan("paper-appB-smallinit").unwrap();
        for e in &small.experiments {
            let c = e.config(0).unwrap();
            assert_eq!(c.n_init, 5 * c.objective.dim());
        }
    }

    #[test]
    fn every_builtin_validates_and_round_trips() {
        for (name, _) in BUILTIN_PLANS {
            let p = builtin_plan(name).unwrap();
            let text = p.serialize();
            let q = ExperimentPlan::parse_and_validate(&text).unwrap();
            assert_eq!(p, q, "{name}");
        }
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = Experiment::new("x").set("objective", "branin").unwrap().set("n_reps", 2).unwrap();
        let b = Experiment::new("x").set("n_reps", 2).unwrap().set("objective", "branin").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = a.clone().set("n_reps", 3).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
