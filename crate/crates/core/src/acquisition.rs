//! Per-iteration acquisition functions and their nonnegativity shifts.
//!
//! Acquisitions report their *unshifted* value; the constant shift is kept
//! separately and only added when a value is reported. Solvers therefore
//! select on unshifted values, which makes the choice of `x_t` exactly
//! independent of the shift (adding a constant in floating point can merge
//! two distinct values into a tie).

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::points::Points;

/// Something a solver can maximize.
pub trait Acquisition: Sync {
    fn dim(&self) -> usize;

    /// Unshifted acquisition value at `x`.
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Unshifted values over a point set.
    fn values(&self, pts: &Points) -> Result<Vec<f64>> {
        pts.iter().map(|p| self.value(p)).collect()
    }

    /// Constant added to make the acquisition nonnegative.
    fn shift(&self) -> f64 {
        0.0
    }

    fn is_differentiable(&self) -> bool {
        false
    }

    /// Unshifted value and gradient at `x`.
    fn value_grad(&self, _x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Err(Error::input("acquisition has no analytic gradient"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaKind {
    /// `B + R·sqrt(2(γ_{t-1} + 1 + log(c/δ)))`.
    Theoretical,
    /// `sqrt(log(t + 2))`.
    Practical,
}

/// Exploration multiplier schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub kind: BetaKind,
    /// RKHS norm bound B.
    pub rkhs_bound: f64,
    /// Sub-Gaussian noise scale R.
    pub noise_scale: f64,
    pub delta: f64,
    /// Numerator `c` in `log(c/δ)`; 1 for exact GP-UCB, 2 for GP-TS and
    /// random-grid GP-UCB, 3 for random-grid GP-TS.
    pub delta_divisor: u8,
}

impl BetaSchedule {
    pub fn practical() -> Self {
        Self {
            kind: BetaKind::Practical,
            rkhs_bound: 1.0,
            noise_scale: 0.0,
            delta: 0.1,
            delta_divisor: 1,
        }
    }

    pub fn theoretical(rkhs_bound: f64, noise_scale: f64, delta: f64, delta_divisor: u8) -> Self {
        Self {
            kind: BetaKind::Theoretical,
            rkhs_bound,
            noise_scale,
            delta,
            delta_divisor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rkhs_bound >= 0.0 && self.rkhs_bound.is_finite()) {
            return Err(Error::config("beta schedule needs a finite B >= 0"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config("beta schedule needs a finite R >= 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("beta schedule needs δ in (0, 1)"));
        }
        if !(1..=3).contains(&self.delta_divisor) {
            return Err(Error::config("δ divisor must be 1, 2 or 3"));
        }
        Ok(())
    }

    /// β_t for iteration `t ≥ 1` given the information gain after `t - 1`
    /// selections.
    pub fn beta(&self, t: usize, gamma_prev: f64) -> f64 {
        debug_assert!(t >= 1);
        match self.kind {
            BetaKind::Practical => ((t as f64 + 2.0).ln()).sqrt(),
            BetaKind::Theoretical => {
                let log_term = (f64::from(self.delta_divisor) / self.delta).ln();
                self.rkhs_bound
                    + self.noise_scale * (2.0 * (gamma_prev.max(0.0) + 1.0 + log_term)).sqrt()
            }
        }
    }
}

/// Shift that makes `μ + βσ + B` nonnegative whenever `‖f‖_H ≤ B`.
pub fn ucb_shift(rkhs_bound: f64) -> f64 {
    rkhs_bound
}

/// Shift that makes a Thompson grid sample nonnegative with probability at
/// least `1 - δ`: `(1 + sqrt(2 log(|grid|/δ)))(β + v) + B`.
pub fn ts_shift(grid_size: usize, delta: f64, beta: f64, v: f64, rkhs_bound: f64) -> f64 {
    let log_term = (grid_size.max(1) as f64 / delta).ln().max(0.0);
    (1.0 + (2.0 * log_term).sqrt()) * (beta + v) + rkhs_bound
}

/// Variance enlargement `(1/η̃ - 1)B` for a solver with worst-case
/// accuracy η̃.
pub fn enlarged_variance_offset(eta_floor: f64, rkhs_bound: f64) -> Result<f64> {
    if !(eta_floor > 0.0 && eta_floor <= 1.0) {
        return Err(Error::input(format!("η̃ must lie in (0, 1], got {eta_floor}")));
    }
    Ok((1.0 / eta_floor - 1.0) * rkhs_bound)
}

/// `μ_{t-1}(x) + β_t σ_{t-1}(x)` over a fixed posterior.
#[derive(Debug, Clone, Copy)]
pub struct Ucb<'a> {
    gp: &'a GpPosterior,
    beta: f64,
    shift: f64,
}

impl<'a> Ucb<'a> {
    pub fn new(gp: &'a GpPosterior, beta: f64, shift: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::input("β must be finite and nonnegative"));
        }
        Ok(Self { gp, beta, shift })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn posterior(&self) -> &GpPosterior {
        self.gp
    }
}

/// Shifted UCB value at one point, via the pointwise posterior.
pub fn ucb_value(gp: &GpPosterior, beta: f64, shift: f64, x: &[f64]) -> Result<f64> {
    let (m, v) = gp.mean_var(x)?;
    Ok(m + beta * v.sqrt() + shift)
}

impl Acquisition for Ucb<'_> {
    fn dim(&self) -> usize {
        self.gp.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (m, v) = self.gp.mean_var_fast(x)?;
        Ok(m + self.beta * v.sqrt())
    }

    fn values(&self, pts: &Points) -> Result<Vec<f64>> {
        let (m, v) = self.gp.mean_var_batch(pts)?;
        Ok(m.iter()
            .zip(&v)
            .map(|(m, v)| m + self.beta * v.sqrt())
            .collect())
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = self.gp.mean_var_grad(x)?;
        let sd = g.var.sqrt();
        let mut grad = g.mean_grad;
        if sd > 0.0 {
            let c = self.beta / (2.0 * sd);
            for (o, dv) in grad.iter_mut().zip(&g.var_grad) {
                *o += c * dv;
            }
        }
        Ok((g.mean + self.beta * sd, grad))
    }
}

/// A Thompson sample drawn jointly over a finite grid. The acquisition is
/// defined only on that grid.
#[derive(Debug, Clone)]
pub struct ThompsonSample {
    grid: Points,
    sample: Vec<f64>,
    beta: f64,
    v_tilde: f64,
    shift: f64,
    index: HashMap<Vec<u64>, usize>,
}

fn point_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl ThompsonSample {
    pub fn grid(&self) -> &Points {
        &self.grid
    }

    /// Unshifted sampled values, aligned with [`grid`](Self::grid).
    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_tilde(&self) -> f64 {
        self.v_tilde
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }
}

/// Draws a Thompson sample on `grid` with marginal standard deviation
/// `β σ_{t-1}(x) + ṽ` and the posterior correlation structure. `ṽ = 0` is
/// plain GP-TS.
pub fn ts_build<R: Rng + ?Sized>(
    gp: &GpPosterior,
    grid: Points,
    beta: f64,
    v_tilde: f64,
    rng: &mut R,
) -> Result<ThompsonSample> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::input("β must be finite and nonnegative"));
    }
    if !(v_tilde >= 0.0 && v_tilde.is_finite()) {
        return Err(Error::input("ṽ must be finite and nonnegative"));
    }
    let sample = gp.sample_on_grid(&grid, |_, sd| beta * sd + v_tilde, rng)?;
    let index = grid
        .iter()
        .enumerate()
        .rev()
        .map(|(i, p)| (point_key(p), i))
        .collect();
    Ok(ThompsonSample {
        grid,
        sample,
        beta,
        v_tilde,
        shift: 0.0,
        index,
    })
}

impl Acquisition for ThompsonSample {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Sampled value at a grid point; `-∞` off the grid.
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .index
            .get(&point_key(x))
            .map_or(f64::NEG_INFINITY, |&i| self.sample[i]))
    }

    fn values(&self, pts: &Points) -> Result<Vec<f64>> {
        if pts == &self.grid {
            return Ok(self.sample.clone());
        }
        pts.iter().map(|p| self.value(p)).collect()
    }

    fn shift(&self) -> f64 {
        self.shift
    }
}

/// One iteration's acquisition: a UCB surface or a Thompson grid sample.
#[derive(Debug, Clone)]
pub enum AcquisitionSpec<'a> {
    Ucb(Ucb<'a>),
    Thompson(ThompsonSample),
}

impl AcquisitionSpec<'_> {
    pub fn as_dyn(&self) -> &dyn Acquisition {
        match self {
            AcquisitionSpec::Ucb(u) => u,
            AcquisitionSpec::Thompson(t) => t,
        }
    }
}

impl Acquisition for AcquisitionSpec<'_> {
    fn dim(&self) -> usize {
        self.as_dyn().dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.as_dyn().value(x)
    }

    fn values(&self, pts: &Points) -> Result<Vec<f64>> {
        self.as_dyn().values(pts)
    }

    fn shift(&self) -> f64 {
        self.as_dyn().shift()
    }

    fn is_differentiable(&self) -> bool {
        self.as_dyn().is_differentiable()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.as_dyn().value_grad(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelSpec, MaternNu};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn posterior(n: usize, seed: u64) -> GpPosterior {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = KernelSpec::matern(MaternNu::FiveHalves, 0.3).unwrap();
        let coords: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        GpPosterior::new(k, 1e-3, Points::from_flat(2, coords).unwrap(), &y).unwrap()
    }

    #[test]
    fn beta_examples() {
        let noiseless = BetaSchedule::theoretical(1.7, 0.0, 0.1, 1);
        for t in 1..10 {
            assert_eq!(noiseless.beta(t, t as f64), 1.7);
        }
        // 1 + sqrt(2 (1 + ln 10)) computed by hand: ln 10 = 2.302585...
        let th = BetaSchedule::theoretical(1.0, 1.0, 0.1, 1);
        assert_abs_diff_eq!(th.beta(1, 0.0), 3.570_1, epsilon = 1e-4);
        assert_abs_diff_eq!(BetaSchedule::practical().beta(1, 0.0), 1.048_1, epsilon = 1e-4);
    }

    #[test]
    fn theoretical_beta_is_monotone_in_gamma() {
        let th = BetaSchedule::theoretical(1.0, 0.5, 0.05, 2);
        let gammas = [0.0, 0.3, 0.3, 1.0, 2.5, 4.0];
        let betas: Vec<f64> = gammas.iter().enumerate().map(|(t, g)| th.beta(t + 1, *g)).collect();
        assert!(betas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schedule_validation() {
        assert!(BetaSchedule::theoretical(1.0, 1.0, 0.0, 1).validate().is_err());
        assert!(BetaSchedule::theoretical(1.0, 1.0, 0.1, 4).validate().is_err());
        assert!(BetaSchedule::practical().validate().is_ok());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(ucb_shift(1.0), 1.0);
        assert_eq!(ucb_shift(0.0), 0.0);
        assert_abs_diff_eq!(ts_shift(1, 1.0, 2.0, 0.5, 1.0), 3.5, epsilon = 1e-15);
        let expected = (1.0 + (2.0 * 1000f64.ln()).sqrt()) * 2.0 + 1.0;
        assert_abs_diff_eq!(ts_shift(100, 0.1, 2.0, 0.0, 1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 10.434, epsilon = 1e-3);
    }

    #[test]
    fn ucb_on_the_prior_is_beta() {
        let gp = GpPosterior::prior(KernelSpec::squared_exponential(1.0).unwrap(), 0.1, 2).unwrap();
        assert_eq!(ucb_value(&gp, 2.0, 0.0, &[0.3, 0.1]).unwrap(), 2.0);
    }

    #[test]
    fn ucb_recomposes_from_posterior() {
        let gp = posterior(3, 1);
        for x in [[0.1, 0.2], [0.7, 0.4], [0.5, 0.9]] {
            let (m, v) = gp.mean_var(&x).unwrap();
            assert_eq!(ucb_value(&gp, 0.0, 0.0, &x).unwrap(), m);
            assert_eq!(ucb_value(&gp, 1.3, 0.7, &x).unwrap(), m + 1.3 * v.sqrt() + 0.7);
            let u = Ucb::new(&gp, 1.3, 0.7).unwrap();
            let decomposed = u.value(&x).unwrap() - m;
            assert!((decomposed - 1.3 * v.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ucb_gradient_matches_finite_differences() {
        let gp = posterior(10, 2);
        let u = Ucb::new(&gp, 1.5, 0.0).unwrap();
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let (v, g) = u.value_grad(&x).unwrap();
            assert_abs_diff_eq!(v, u.value(&x).unwrap(), epsilon = 1e-12);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (u.value(&xp).unwrap() - u.value(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-4, "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn degenerate_thompson_draw_is_the_mean() {
        let gp = posterior(6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = Points::from_flat(2, (0..40).map(|_| rng.random()).collect()).unwrap();
        let (mean, _) = gp.mean_var_batch(&grid).unwrap();
        let ts = ts_build(&gp, grid.clone(), 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(ts.sample(), mean.as_slice());
        assert_eq!(ts.values(&grid).unwrap(), mean);
        assert_eq!(ts.value(grid.row(3)).unwrap(), mean[3]);
        assert_eq!(ts.value(&[2.0, 2.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn enlarged_offset() {
        assert_eq!(enlarged_variance_offset(0.5, 2.0).unwrap(), 2.0);
        assert_eq!(enlarged_variance_offset(1.0, 2.0).unwrap(), 0.0);
        assert!(enlarged_variance_offset(0.0, 2.0).is_err());
    }
}
