//! Benchmark objectives in maximization form, and the observation noise
//! model.
//!
//! Classical test functions are stated as minimization problems; every
//! objective here is negated where needed so that larger is better and
//! `f_star` is the maximum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MaternNu};
use crate::points::{Bounds, Points};
use crate::sobol::sobol_in_box;
use crate::solvers::reference_search;

/// Low-discrepancy points used to fix the value normalization.
const NORMALIZATION_PROBE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    Branin,
    Rastrigin3,
    Hartmann3,
    Hartmann4,
    Levy5,
    Hartmann6,
    SyntheticRkhs,
}

impl ObjectiveKind {
    pub const BENCHMARKS: [ObjectiveKind; 6] = [
        ObjectiveKind::Branin,
        ObjectiveKind::Rastrigin3,
        ObjectiveKind::Hartmann3,
        ObjectiveKind::Hartmann4,
        ObjectiveKind::Levy5,
        ObjectiveKind::Hartmann6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Branin => "branin",
            ObjectiveKind::Rastrigin3 => "rastrigin3",
            ObjectiveKind::Hartmann3 => "hartmann3",
            ObjectiveKind::Hartmann4 => "hartmann4",
            ObjectiveKind::Levy5 => "levy5",
            ObjectiveKind::Hartmann6 => "hartmann6",
            ObjectiveKind::SyntheticRkhs => "synthetic-rkhs",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ObjectiveKind::SyntheticRkhs]
            .into_iter()
            .chain(ObjectiveKind::BENCHMARKS)
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::input(format!("unknown objective '{s}'")))
    }
}

/// `f(x) = Σ w_i k(x, c_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion {
    pub kernel: KernelSpec,
    pub centers: Points,
    pub weights: Vec<f64>,
}

impl KernelExpansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * self.kernel.eval_unchecked(x, c))
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut g = vec![0.0; x.len()];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            self.kernel.grad_into_unchecked(x, c, &mut g);
            for (o, gi) in out.iter_mut().zip(&g) {
                *o += w * gi;
            }
        }
        out
    }

    /// `‖f‖_H = √(wᵀ K_c w)`.
    pub fn rkhs_norm(&self) -> Result<f64> {
        let k = self.kernel.gram(&self.centers)?;
        let w = DVector::from_column_slice(&self.weights);
        Ok(w.dot(&(k * &w)).max(0.0).sqrt())
    }
}

/// Knobs for [`synthetic_rkhs`] objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub dim: usize,
    pub n_centers: usize,
    pub rkhs_bound: f64,
    /// Isotropic lengthscale on the unit cube; `None` gives `0.2·√d`.
    pub lengthscale: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            dim: 11,
            n_centers: 40,
            rkhs_bound: 2.0,
            lengthscale: None,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn kernel(&self) -> Result<KernelSpec> {
        let ell = self.lengthscale.unwrap_or(0.2 * (self.dim as f64).sqrt());
        KernelSpec::matern(MaternNu::FiveHalves, ell)
    }
}

/// An objective with its box, optimum and the fixed affine map used to
/// present values to the surrogate.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    kind: ObjectiveKind,
    domain: Bounds,
    f_star: f64,
    x_star: Vec<Vec<f64>>,
    expansion: Option<Arc<KernelExpansion>>,
    value_offset: f64,
    value_scale: f64,
    /// Lowest value seen on the normalization probe.
    probe_min: f64,
    /// Largest `|f|` on the probe, in surrogate units.
    probe_abs_max: f64,
    rkhs_norm: Option<f64>,
}

impl ObjectiveSpec {
    /// One of the six fixed benchmarks.
    pub fn benchmark(kind: ObjectiveKind) -> Result<Self> {
        let (domain, f_star, x_star) = match kind {
            ObjectiveKind::Branin => (
                Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0])?,
                -5.0 / (4.0 * PI),
                vec![vec![-PI, 12.275], vec![PI, 2.275], vec![3.0 * PI, 2.475]],
            ),
            ObjectiveKind::Rastrigin3 => (Bounds::cube(3, -5.12, 5.12)?, 0.0, vec![vec![0.0; 3]]),
            ObjectiveKind::Hartmann3 => (
                Bounds::unit(3),
                3.862_779_787_332_662,
                vec![vec![0.114_588_853_080_577_1, 0.555_648_892_093_698, 0.852_546_985_005_523_4]],
            ),
            ObjectiveKind::Hartmann4 => (
                Bounds::unit(4),
                3.134_494_141_222_398,
                vec![vec![
                    0.187_395_270_143_362_57,
                    0.194_151_521_279_659_23,
                    0.557_917_774_353_860_7,
                    0.264_779_620_579_705_4,
                ]],
            ),
            ObjectiveKind::Levy5 => (Bounds::cube(5, -10.0, 10.0)?, 0.0, vec![vec![1.0; 5]]),
            ObjectiveKind::Hartmann6 => (
                Bounds::unit(6),
                3.322_368_011_415_513,
                vec![vec![
                    0.201_689_503_003_651_85,
                    0.150_010_686_167_211_36,
                    0.476_873_969_856_915_3,
                    0.275_332_430_222_121_84,
                    0.311_651_613_062_048,
                    0.657_300_532_487_873_3,
                ]],
            ),
            ObjectiveKind::SyntheticRkhs => {
                return Err(Error::input("use synthetic_rkhs to build a synthetic objective"));
            }
        };
        let mut spec = Self {
            kind,
            domain,
            f_star,
            x_star,
            expansion: None,
            value_offset: 0.0,
            value_scale: 1.0,
            probe_min: 0.0,
            probe_abs_max: 0.0,
            rkhs_norm: None,
        };
        spec.calibrate(true)?;
        Ok(spec)
    }

    /// Builds `kind` with default synthetic settings where relevant.
    pub fn build(kind: ObjectiveKind, synthetic: &SyntheticParams) -> Result<Self> {
        match kind {
            ObjectiveKind::SyntheticRkhs => {
                let mut rng = ChaCha8Rng::seed_from_u64(synthetic.seed);
                synthetic_rkhs(
                    synthetic.kernel()?,
                    synthetic.n_centers,
                    synthetic.rkhs_bound,
                    Bounds::unit(synthetic.dim),
                    &mut rng,
                )
            }
            k => Self::benchmark(k),
        }
    }

    /// Fixes the surrogate normalization (probe mean and standard deviation
    /// when `standardize`, the identity otherwise) and the probe extremes.
    fn calibrate(&mut self, standardize: bool) -> Result<()> {
        let probe = sobol_in_box(&self.domain, NORMALIZATION_PROBE, None)?;
        let vals: Vec<f64> = probe.iter().map(|x| self.eval_unchecked(x)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        if standardize && sd > 0.0 {
            self.value_offset = mean;
            self.value_scale = sd;
        }
        self.probe_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        self.probe_abs_max = vals
            .iter()
            .chain(std::iter::once(&self.f_star))
            .map(|v| ((v - self.value_offset) / self.value_scale).abs())
            .fold(0.0, f64::max);
        Ok(())
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Bounds {
        &self.domain
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn x_star(&self) -> &[Vec<f64>] {
        &self.x_star
    }

    pub fn expansion(&self) -> Option<&KernelExpansion> {
        self.expansion.as_deref()
    }

    /// Surrogate value `(f − offset) / scale`.
    pub fn to_model(&self, f: f64) -> f64 {
        (f - self.value_offset) / self.value_scale
    }

    pub fn value_offset(&self) -> f64 {
        self.value_offset
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    /// `f* − min f` over the normalization probe.
    pub fn value_range(&self) -> f64 {
        self.f_star - self.probe_min
    }

    /// Bound on `|f|` in surrogate units used for the nonnegativity shifts:
    /// the exact RKHS bound for synthetic objectives, otherwise 1.25 times
    /// the largest probe magnitude.
    pub fn shift_bound(&self) -> f64 {
        self.rkhs_norm.unwrap_or(1.25 * self.probe_abs_max)
    }

    /// `‖f‖_H` for synthetic objectives.
    pub fn rkhs_norm(&self) -> Option<f64> {
        self.rkhs_norm
    }

    /// Per-dimension lengthscales of 0.2 times the box side; the generating
    /// kernel's lengthscales for synthetic objectives.
    pub fn default_lengthscales(&self) -> Vec<f64> {
        match &self.expansion {
            Some(e) => {
                let l = e.kernel.lengthscales();
                if l.len() == 1 {
                    vec![l[0]; self.dim()]
                } else {
                    l.to_vec()
                }
            }
            None => self.domain.widths().iter().map(|w| 0.2 * w).collect(),
        }
    }

    /// Noise-free value, maximization form.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::input(format!(
                "point {x:?} lies outside the {} domain",
                self.name()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            ObjectiveKind::Branin => -branin(x),
            ObjectiveKind::Rastrigin3 => -rastrigin(x),
            ObjectiveKind::Hartmann3 => hartmann3(x),
            ObjectiveKind::Hartmann4 => -hartmann4(x),
            ObjectiveKind::Levy5 => -levy(x),
            ObjectiveKind::Hartmann6 => hartmann6(x),
            ObjectiveKind::SyntheticRkhs => self.expansion.as_ref().map_or(0.0, |e| e.eval(x)),
        }
    }

    /// `evaluate(x)` plus a draw from `noise`.
    pub fn observe<R: Rng + ?Sized>(&self, noise: &NoiseModel, x: &[f64], rng: &mut R) -> Result<f64> {
        Ok(self.evaluate(x)? + noise.draw(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    /// Zero-mean Gaussian with the given standard deviation.
    Gaussian(f64),
}

impl NoiseModel {
    pub fn std_dev(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian(r) => *r,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian(r) => r * rng.sample::<f64, _>(StandardNormal),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Gaussian(r) if !(r.is_finite() && *r >= 0.0) => {
                Err(Error::config("noise standard deviation must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }
}

struct ExpansionAcq<'a>(&'a KernelExpansion);

impl Acquisition for ExpansionAcq<'_> {
    fn dim(&self) -> usize {
        self.0.centers.dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.eval(x))
    }
    fn is_differentiable(&self) -> bool {
        true
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.0.eval(x), self.0.grad(x)))
    }
}

/// Oracle size used to locate the synthetic maximum.
const SYNTHETIC_SEARCH: usize = 1 << 15;

/// Objective `f = Σ w_i k(·, c_i)` from explicit centres and weights, with
/// the weights scaled down if needed so that `‖f‖_H ≤ weight_bound`.
pub fn kernel_expansion_objective(
    kernel: KernelSpec,
    centers: Points,
    weights: Vec<f64>,
    weight_bound: f64,
    domain: Bounds,
) -> Result<ObjectiveSpec> {
    if centers.is_empty() || centers.len() != weights.len() {
        return Err(Error::input("need one weight per centre and at least one centre"));
    }
    if centers.dim() != domain.dim() {
        return Err(Error::input("centres and domain dimensions differ"));
    }
    if !(weight_bound.is_finite() && weight_bound > 0.0) {
        return Err(Error::input("RKHS bound must be positive"));
    }
    kernel.check_dim(domain.dim())?;
    let mut exp = KernelExpansion {
        kernel,
        centers,
        weights,
    };
    let mut norm = exp.rkhs_norm()?;
    if norm > weight_bound {
        let s = weight_bound / norm;
        exp.weights.iter_mut().for_each(|w| *w *= s);
        norm = exp.rkhs_norm()?;
    }

    let acq = ExpansionAcq(&exp);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let found = reference_search(&acq, &domain, SYNTHETIC_SEARCH, Some(&exp.centers), &mut rng)?;
    let mut spec = ObjectiveSpec {
        kind: ObjectiveKind::SyntheticRkhs,
        domain,
        f_star: found.raw_value,
        x_star: vec![found.x],
        expansion: Some(Arc::new(exp)),
        value_offset: 0.0,
        value_scale: 1.0,
        probe_min: 0.0,
        probe_abs_max: 0.0,
        rkhs_norm: Some(norm),
    };
    spec.calibrate(false)?;
    Ok(spec)
}

/// Random kernel-expansion objective: `n_centers` uniform centres, Gaussian
/// weights rescaled so that `‖f‖_H = weight_bound` exactly.
pub fn synthetic_rkhs<R: Rng + ?Sized>(
    kernel: KernelSpec,
    n_centers: usize,
    weight_bound: f64,
    domain: Bounds,
    rng: &mut R,
) -> Result<ObjectiveSpec> {
    if n_centers == 0 {
        return Err(Error::input("synthetic objective needs at least one centre"));
    }
    let centers = domain.sample_points(n_centers, rng);
    let mut weights: Vec<f64> = (0..n_centers).map(|_| rng.sample(StandardNormal)).collect();
    let probe = KernelExpansion {
        kernel: kernel.clone(),
        centers: centers.clone(),
        weights: weights.clone(),
    };
    let norm = probe.rkhs_norm()?;
    if norm > 0.0 {
        let s = weight_bound / norm;
        weights.iter_mut().for_each(|w| *w *= s);
    }
    kernel_expansion_objective(kernel, centers, weights, weight_bound, domain)
}

fn branin(x: &[f64]) -> f64 {
    let (a, b, c, r, s, t) = (
        1.0,
        5.1 / (4.0 * PI * PI),
        5.0 / PI,
        6.0,
        10.0,
        1.0 / (8.0 * PI),
    );
    let q = x[1] - b * x[0] * x[0] + c * x[0] - r;
    a * q * q + s * (1.0 - t) * x[0].cos() + s
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let mut f = (PI * w[0]).sin().powi(2);
    for wi in &w[..d - 1] {
        f += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    f + (w[d - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * w[d - 1]).sin().powi(2))
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];

const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// `Σ α_i exp(−Σ_j A_ij (x_j − P_ij)²)` over the first `x.len()` columns.
fn hartmann_sum<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let e: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| a[i][j] * (v - p[i][j]).powi(2))
                .sum();
            HARTMANN_ALPHA[i] * (-e).exp()
        })
        .sum()
}

fn hartmann3(x: &[f64]) -> f64 {
    hartmann_sum(x, &HARTMANN3_A, &HARTMANN3_P)
}

/// Rescaled four-dimensional variant built from the six-dimensional
/// constants (minimization form).
fn hartmann4(x: &[f64]) -> f64 {
    (1.1 - hartmann_sum(x, &HARTMANN6_A, &HARTMANN6_P)) / 0.839
}

fn hartmann6(x: &[f64]) -> f64 {
    hartmann_sum(x, &HARTMANN6_A, &HARTMANN6_P)
}
