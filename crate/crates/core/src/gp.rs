//! Exact Gaussian-process posterior with incremental Cholesky updates.
//!
//! The posterior keeps the lower Cholesky factor `L` of `K + τI`, its
//! triangular inverse (stored transposed as an upper factor `U = L⁻ᵀ`), and
//! `α = (K + τI)⁻¹ y`. New observations extend `L` and `U` by one border row
//! in O(n²); every [`REFACTOR_EVERY`] updates the factor is recomputed from
//! scratch so rounding drift stays bounded.
//!
//! Pointwise queries use forward substitution with `L`. Batched queries use
//! `U` so that the dominant cost is a single dense matrix product per chunk.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::points::Points;

/// Diagonal jitter tried in turn when a factorization fails.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Full refactorization period, in border updates.
pub const REFACTOR_EVERY: usize = 64;

/// Variances in `[-NEG_VAR_TOL, 0)` are rounding and clamp to zero; anything
/// lower is reported as a numerical failure.
pub const NEG_VAR_TOL: f64 = 1e-10;

const BATCH_CHUNK: usize = 1024;

/// GP posterior given a fixed kernel, noise variance and data set.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: KernelSpec,
    noise: f64,
    jitter: f64,
    dim: usize,
    x: Points,
    y: DVector<f64>,
    chol: DMatrix<f64>,
    chol_inv_t: DMatrix<f64>,
    alpha: DVector<f64>,
    updates_since_refactor: usize,
}

/// Mean, variance and their input gradients at one point.
#[derive(Debug, Clone)]
pub struct MeanVarGrad {
    pub mean: f64,
    pub var: f64,
    pub mean_grad: Vec<f64>,
    pub var_grad: Vec<f64>,
}

impl GpPosterior {
    /// Builds the posterior from an initial design (possibly empty).
    pub fn new(kernel: KernelSpec, noise: f64, x0: Points, y0: &[f64]) -> Result<Self> {
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::input("noise variance must be finite and positive"));
        }
        if x0.len() != y0.len() {
            return Err(Error::input(format!(
                "{} design points but {} observations",
                x0.len(),
                y0.len()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observations must be finite"));
        }
        let dim = x0.dim();
        kernel.check_dim(dim)?;
        let mut gp = Self {
            kernel,
            noise,
            jitter: 0.0,
            dim,
            x: x0,
            y: DVector::from_column_slice(y0),
            chol: DMatrix::zeros(0, 0),
            chol_inv_t: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            updates_since_refactor: 0,
        };
        gp.refactor()?;
        Ok(gp)
    }

    /// Prior with no data in `dim` dimensions.
    pub fn prior(kernel: KernelSpec, noise: f64, dim: usize) -> Result<Self> {
        Self::new(kernel, noise, Points::new(dim), &[])
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal jitter currently added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_data(&self) -> &Points {
        &self.x
    }

    pub fn y_data(&self) -> &[f64] {
        self.y.as_slice()
    }

    /// Lower Cholesky factor of `K + (τ + jitter) I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "query of dimension {} against a posterior of dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn shifted_gram(&self, jitter: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.kernel.diag() + self.noise + jitter;
            for j in 0..i {
                let v = self.kernel.eval_unchecked(self.x.row(i), self.x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Full refactorization of the current data with the jitter ladder.
    fn refactor(&mut self) -> Result<()> {
        let n = self.len();
        self.updates_since_refactor = 0;
        if n == 0 {
            self.chol = DMatrix::zeros(0, 0);
            self.chol_inv_t = DMatrix::zeros(0, 0);
            self.alpha = DVector::zeros(0);
            self.jitter = 0.0;
            return Ok(());
        }
        for &jitter in JITTER_LADDER.iter().filter(|j| **j >= self.jitter) {
            if let Some(ch) = Cholesky::new(self.shifted_gram(jitter)) {
                let l = ch.unpack();
                let inv = l
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
                self.chol = l;
                self.chol_inv_t = inv.transpose();
                self.jitter = jitter;
                self.recompute_alpha()?;
                return Ok(());
            }
        }
        Err(Error::numerical(format!(
            "Cholesky of K + τI failed for n = {n} even with jitter {}",
            JITTER_LADDER[JITTER_LADDER.len() - 1]
        )))
    }

    fn recompute_alpha(&mut self) -> Result<()> {
        let z = self
            .chol
            .solve_lower_triangular(&self.y)
            .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        self.alpha = self
            .chol
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        Ok(())
    }

    fn kernel_column(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.x.iter().map(|xi| self.kernel.eval_unchecked(x, xi)),
        )
    }

    /// Returns `var` clamped at zero, or an error if it is more negative than
    /// rounding explains.
    fn clamp_var(var: f64) -> Result<f64> {
        if var >= 0.0 {
            Ok(var)
        } else if var >= -NEG_VAR_TOL {
            Ok(0.0)
        } else {
            Err(Error::numerical(format!("posterior variance {var:e} is negative")))
        }
    }

    /// Posterior mean and variance at `x`.
    pub fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let prior = self.kernel.diag();
        if self.is_empty() {
            return Ok((0.0, prior));
        }
        let kv = self.kernel_column(x);
        let mean = kv.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&kv)
            .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        let var = Self::clamp_var(prior - v.norm_squared())?;
        Ok((mean, var.min(prior)))
    }

    /// Mean and variance through the stored inverse factor; faster than
    /// [`mean_var`](Self::mean_var) and agrees with it to rounding.
    pub fn mean_var_fast(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let prior = self.kernel.diag();
        if self.is_empty() {
            return Ok((0.0, prior));
        }
        let kv = self.kernel_column(x);
        let mean = kv.dot(&self.alpha);
        let v = self.chol_inv_t.tr_mul(&kv);
        let var = Self::clamp_var(prior - v.norm_squared())?;
        Ok((mean, var.min(prior)))
    }

    /// Batched mean and variance over a point set.
    pub fn mean_var_batch(&self, pts: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
        if pts.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        if pts.dim() != self.dim {
            return Err(Error::input("batch query dimension mismatch"));
        }
        let m = pts.len();
        let prior = self.kernel.diag();
        if self.is_empty() {
            return Ok((vec![0.0; m], vec![prior; m]));
        }
        let n = self.len();
        let mut means = Vec::with_capacity(m);
        let mut vars = Vec::with_capacity(m);
        let mut start = 0;
        while start < m {
            let rows = (m - start).min(BATCH_CHUNK);
            let mut ks = DMatrix::zeros(rows, n);
            for j in 0..n {
                let xj = self.x.row(j);
                for i in 0..rows {
                    ks[(i, j)] = self.kernel.eval_unchecked(pts.row(start + i), xj);
                }
            }
            let mu = &ks * &self.alpha;
            let v = &ks * &self.chol_inv_t;
            let mut sq = vec![0.0; rows];
            for j in 0..n {
                let col = v.column(j);
                for (s, c) in sq.iter_mut().zip(col.iter()) {
                    *s += c * c;
                }
            }
            means.extend_from_slice(mu.as_slice());
            for s in sq {
                vars.push(Self::clamp_var(prior - s)?.min(prior));
            }
            start += rows;
        }
        Ok((means, vars))
    }

    /// Mean, variance and their gradients with respect to the query point.
    pub fn mean_var_grad(&self, x: &[f64]) -> Result<MeanVarGrad> {
        self.check_point(x)?;
        let d = self.dim;
        let prior = self.kernel.diag();
        if self.is_empty() {
            return Ok(MeanVarGrad {
                mean: 0.0,
                var: prior,
                mean_grad: vec![0.0; d],
                var_grad: vec![0.0; d],
            });
        }
        let n = self.len();
        let kv = self.kernel_column(x);
        let mut jac = vec![0.0; n * d];
        for (i, xi) in self.x.iter().enumerate() {
            self.kernel
                .grad_into_unchecked(x, xi, &mut jac[i * d..(i + 1) * d]);
        }
        let mean = kv.dot(&self.alpha);
        let v = self.chol_inv_t.tr_mul(&kv);
        let var = Self::clamp_var(prior - v.norm_squared())?.min(prior);
        // (K + τI)⁻¹ k(x) = U v
        let w = &self.chol_inv_t * &v;
        let mut mean_grad = vec![0.0; d];
        let mut var_grad = vec![0.0; d];
        for i in 0..n {
            let (a, b) = (self.alpha[i], w[i]);
            for j in 0..d {
                let g = jac[i * d + j];
                mean_grad[j] += a * g;
                var_grad[j] -= 2.0 * b * g;
            }
        }
        Ok(MeanVarGrad {
            mean,
            var,
            mean_grad,
            var_grad,
        })
    }

    /// Conditions on one more observation in place.
    pub fn update_in_place(&mut self, x_new: &[f64], y_new: f64) -> Result<()> {
        self.check_point(x_new)?;
        if !y_new.is_finite() {
            return Err(Error::input("observation must be finite"));
        }
        let n = self.len();
        let kv = self.kernel_column(x_new);
        self.x.push(x_new)?;
        let y = std::mem::replace(&mut self.y, DVector::zeros(0));
        self.y = y.push(y_new);

        if n == 0 || self.updates_since_refactor + 1 >= REFACTOR_EVERY {
            return self.refactor();
        }

        let c = self.kernel.diag() + self.noise + self.jitter;
        let l = self
            .chol
            .solve_lower_triangular(&kv)
            .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        let d2 = c - l.norm_squared();
        if !(d2.is_finite() && d2 > 0.5 * self.noise) {
            // The border pivot has lost more than half the noise floor to
            // rounding; refactor the whole matrix instead.
            return self.refactor();
        }
        let d = d2.sqrt();
        let new_col = &self.chol_inv_t * &l;

        let chol = std::mem::replace(&mut self.chol, DMatrix::zeros(0, 0));
        let mut chol = chol.insert_row(n, 0.0).insert_column(n, 0.0);
        for j in 0..n {
            chol[(n, j)] = l[j];
        }
        chol[(n, n)] = d;
        self.chol = chol;

        let u = std::mem::replace(&mut self.chol_inv_t, DMatrix::zeros(0, 0));
        let mut u = u.insert_row(n, 0.0).insert_column(n, 0.0);
        for i in 0..n {
            u[(i, n)] = -new_col[i] / d;
        }
        u[(n, n)] = 1.0 / d;
        self.chol_inv_t = u;

        self.updates_since_refactor += 1;
        self.recompute_alpha()
    }

    /// Posterior after one more observation; `self` is left unchanged.
    pub fn update(&self, x_new: &[f64], y_new: f64) -> Result<Self> {
        let mut next = self.clone();
        next.update_in_place(x_new, y_new)?;
        Ok(next)
    }

    /// Joint posterior mean and covariance over a grid.
    pub fn mean_cov_on(&self, grid: &Points) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if grid.is_empty() {
            return Err(Error::input("grid must be nonempty"));
        }
        if grid.dim() != self.dim {
            return Err(Error::input("grid dimension mismatch"));
        }
        let mut cov = self.kernel.gram(grid)?;
        if self.is_empty() {
            return Ok((vec![0.0; grid.len()], cov));
        }
        let ks = self.kernel.cross(grid, &self.x);
        let mean = (&ks * &self.alpha).as_slice().to_vec();
        let v = &ks * &self.chol_inv_t;
        cov.gemm(-1.0, &v, &v.transpose(), 1.0);
        Ok((mean, cov))
    }

    /// One joint draw over `grid` from the normal with mean μ(grid) and
    /// covariance `D·Corr·D`, where `Corr` is the posterior correlation and
    /// `D = diag(scale(x_i, σ(x_i)))`.
    ///
    /// `scale` receives each grid point together with its posterior standard
    /// deviation. Points with zero posterior variance or zero scale are
    /// returned at their mean.
    pub fn sample_on_grid<R, F>(&self, grid: &Points, scale: F, rng: &mut R) -> Result<Vec<f64>>
    where
        R: Rng + ?Sized,
        F: Fn(&[f64], f64) -> f64,
    {
        let (mean, cov) = self.mean_cov_on(grid)?;
        let m = grid.len();
        let prior = self.kernel.diag();
        let mut sd = Vec::with_capacity(m);
        let mut scales = Vec::with_capacity(m);
        for i in 0..m {
            let s2 = Self::clamp_var(cov[(i, i)])?;
            let s = s2.sqrt();
            let sc = scale(grid.row(i), s);
            if !(sc.is_finite() && sc >= 0.0) {
                return Err(Error::input(format!("scale function returned {sc} at grid point {i}")));
            }
            sd.push(s);
            scales.push(sc);
        }
        let active: Vec<usize> = (0..m)
            .filter(|&i| scales[i] > 0.0 && sd[i] * sd[i] > 1e-12 * prior)
            .collect();
        let mut out = mean;
        if active.is_empty() {
            return Ok(out);
        }
        let a = active.len();
        let mut corr = DMatrix::zeros(a, a);
        for (p, &i) in active.iter().enumerate() {
            corr[(p, p)] = 1.0;
            for (q, &j) in active.iter().enumerate().take(p) {
                let c = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
                corr[(p, q)] = c;
                corr[(q, p)] = c;
            }
        }
        let factor = cholesky_with_ladder(&corr).ok_or_else(|| {
            Error::numerical(format!(
                "grid correlation matrix of size {a} is not positive definite after jitter"
            ))
        })?;
        let z = DVector::from_iterator(a, (0..a).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let draw = factor * z;
        for (p, &i) in active.iter().enumerate() {
            out[i] += scales[i] * draw[p];
        }
        Ok(out)
    }
}

impl GpPosterior {
    /// Log marginal likelihood of the observations under the current kernel
    /// and noise, `−½ yᵀα − Σ ln L_ii − (n/2) ln 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let fit = self.y.dot(&self.alpha);
        let log_det: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Candidate lengthscale factors (relative to the box widths) and output
/// scales searched by [`fit_kernel_on_design`].
pub const FIT_LENGTHSCALE_FACTORS: (f64, f64, usize) = (0.05, 2.0, 25);
pub const FIT_OUTPUT_SCALES: (f64, f64, usize) = (0.1, 10.0, 13);

fn log_grid((lo, hi, n): (f64, f64, usize)) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

/// Picks the kernel of `template`'s family with lengthscales `factor·widths`
/// and an output scale from a log-spaced grid, maximizing the marginal
/// likelihood of `(x, y)` with noise variance `noise`. Settings whose Gram
/// matrix cannot be factored are skipped.
pub fn fit_kernel_on_design(
    template: &KernelSpec,
    widths: &[f64],
    x: &Points,
    y: &[f64],
    noise: f64,
) -> Result<KernelSpec> {
    if x.is_empty() {
        return Err(Error::input("cannot fit a kernel without data"));
    }
    let mut best: Option<(f64, KernelSpec)> = None;
    for factor in log_grid(FIT_LENGTHSCALE_FACTORS) {
        let ls: Vec<f64> = widths.iter().map(|w| w * factor).collect();
        for scale in log_grid(FIT_OUTPUT_SCALES) {
            let kernel = KernelSpec::new(template.family(), ls.clone(), scale)?;
            let Ok(gp) = GpPosterior::new(kernel.clone(), noise, x.clone(), y) else {
                continue;
            };
            let lml = gp.log_marginal_likelihood();
            if lml.is_finite() && best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, kernel));
            }
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::numerical("no kernel setting could be factored"))
}

/// Lower Cholesky factor of `a + jitter·I` for the first ladder rung that
/// succeeds.
pub fn cholesky_with_ladder(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    JITTER_LADDER.iter().find_map(|&j| {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += j;
        }
        Cholesky::new(m).map(Cholesky::unpack)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::MaternNu;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(1.0).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Points {
        let coords = (0..n * d).map(|_| rng.random::<f64>()).collect();
        Points::from_flat(d, coords).unwrap()
    }

    #[test]
    fn prior_is_zero_mean_unit_variance() {
        let gp = GpPosterior::prior(se(), 0.01, 2).unwrap();
        assert_eq!(gp.mean_var(&[0.3, 0.9]).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn single_point_by_hand() {
        let x0 = Points::from_rows(&[[0.2, 0.4]]).unwrap();
        let gp = GpPosterior::new(se(), 0.01, x0, &[2.0]).unwrap();
        let (m, v) = gp.mean_var(&[0.2, 0.4]).unwrap();
        assert_abs_diff_eq!(m, 2.0 / 1.01, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 1.980_198, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 1.0 - 1.0 / 1.01, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.009_901, epsilon = 1e-6);
    }

    #[test]
    fn empty_then_one_update_matches_init() {
        let gp = GpPosterior::prior(se(), 0.01, 2).unwrap();
        let up = gp.update(&[0.2, 0.4], 2.0).unwrap();
        let (m, v) = up.mean_var(&[0.2, 0.4]).unwrap();
        assert_abs_diff_eq!(m, 2.0 / 1.01, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.0 - 1.0 / 1.01, epsilon = 1e-12);
        // the original is untouched
        assert!(gp.is_empty());
    }

    #[test]
    fn interpolates_in_the_small_noise_limit() {
        let x0 = Points::from_rows(&[[0.1], [0.5], [0.9]]).unwrap();
        let gp = GpPosterior::new(se(), 1e-8, x0, &[1.0, -2.0, 0.5]).unwrap();
        let (m, _) = gp.mean_var(&[0.5]).unwrap();
        assert!((m + 2.0).abs() < 1e-5);
    }

    #[test]
    fn duplicate_update_shrinks_variance() {
        let x0 = Points::from_rows(&[[0.3]]).unwrap();
        let gp = GpPosterior::new(se(), 0.1, x0, &[1.0]).unwrap();
        let (_, v1) = gp.mean_var(&[0.3]).unwrap();
        let gp2 = gp.update(&[0.3], 1.0).unwrap();
        let (_, v2) = gp2.mean_var(&[0.3]).unwrap();
        // 1×1: 1 - 1/1.1; 2×2 with duplicates: 1 - 2/2.1
        assert_abs_diff_eq!(v1, 1.0 - 1.0 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(v2, 1.0 - 2.0 / 2.1, epsilon = 1e-12);
        assert!(v2 < v1);
    }

    #[test]
    fn update_matches_refit_across_refactor_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kernel = KernelSpec::matern(MaternNu::FiveHalves, 0.4).unwrap();
        let pts = random_points(&mut rng, 150, 3);
        let ys: Vec<f64> = (0..150).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut gp = GpPosterior::prior(kernel.clone(), 1e-3, 3).unwrap();
        for (x, y) in pts.iter().zip(&ys) {
            gp.update_in_place(x, *y).unwrap();
        }
        let refit = GpPosterior::new(kernel, 1e-3, pts, &ys).unwrap();
        let probes = random_points(&mut rng, 50, 3);
        for p in probes.iter() {
            let (m1, v1) = gp.mean_var(p).unwrap();
            let (m2, v2) = refit.mean_var(p).unwrap();
            assert!((m1 - m2).abs() < 1e-8 && (v1 - v2).abs() < 1e-8);
        }
    }

    #[test]
    fn batch_agrees_with_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let kernel = KernelSpec::matern(MaternNu::FiveHalves, 0.3).unwrap();
        let x0 = random_points(&mut rng, 40, 2);
        let y0: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gp = GpPosterior::new(kernel, 1e-2, x0, &y0).unwrap();
        let probes = random_points(&mut rng, 2500, 2);
        let (mb, vb) = gp.mean_var_batch(&probes).unwrap();
        for (i, p) in probes.iter().enumerate() {
            let (m, v) = gp.mean_var(p).unwrap();
            assert!((m - mb[i]).abs() < 1e-10, "mean {m} vs {}", mb[i]);
            assert!((v - vb[i]).abs() < 1e-10, "var {v} vs {}", vb[i]);
            let (mf, vf) = gp.mean_var_fast(p).unwrap();
            assert!((m - mf).abs() < 1e-10 && (v - vf).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kernel = KernelSpec::matern(MaternNu::FiveHalves, 0.5).unwrap();
        let x0 = random_points(&mut rng, 12, 2);
        let y0: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gp = GpPosterior::new(kernel, 1e-3, x0, &y0).unwrap();
        let h = 1e-6;
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let g = gp.mean_var_grad(&x).unwrap();
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let (mp, vp) = gp.mean_var(&xp).unwrap();
                let (mm, vm) = gp.mean_var(&xm).unwrap();
                assert!(((mp - mm) / (2.0 * h) - g.mean_grad[j]).abs() < 1e-5);
                assert!(((vp - vm) / (2.0 * h) - g.var_grad[j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GpPosterior::prior(se(), 0.0, 2).is_err());
        let x0 = Points::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(GpPosterior::new(se(), 0.1, x0, &[1.0, 2.0]).is_err());
        let gp = GpPosterior::prior(se(), 0.1, 2).unwrap();
        assert!(gp.mean_var(&[0.0]).is_err());
    }

    #[test]
    fn zero_scale_returns_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = random_points(&mut rng, 5, 2);
        let gp = GpPosterior::new(se(), 0.01, x0, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let grid = random_points(&mut rng, 30, 2);
        let (mean, _) = gp.mean_var_batch(&grid).unwrap();
        let draw = gp.sample_on_grid(&grid, |_, _| 0.0, &mut rng).unwrap();
        assert_eq!(draw, mean);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let gp = GpPosterior::prior(se(), 0.01, 1).unwrap();
        let grid = Points::from_rows(&[[0.0], [0.5], [1.0]]).unwrap();
        let a = gp
            .sample_on_grid(&grid, |_, s| s, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let b = gp
            .sample_on_grid(&grid, |_, s| s, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_marginal_likelihood_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_points(&mut rng, 12, 2);
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let kernel = KernelSpec::matern(MaternNu::FiveHalves, 0.4).unwrap();
        let gp = GpPosterior::new(kernel.clone(), 0.05, x.clone(), &y).unwrap();
        let mut k = kernel.gram(&x).unwrap();
        for i in 0..12 {
            k[(i, i)] += 0.05;
        }
        let yv = DVector::from_column_slice(&y);
        let inv = k.clone().try_inverse().unwrap();
        let dense = -0.5 * (yv.transpose() * inv * &yv)[(0, 0)]
            - 0.5 * k.determinant().ln()
            - 6.0 * (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(gp.log_marginal_likelihood(), dense, epsilon = 1e-8);
    }

    #[test]
    fn design_fit_tracks_roughness() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = random_points(&mut rng, 40, 1);
        let smooth: Vec<f64> = x.iter().map(|p| (1.5 * p[0]).sin()).collect();
        let rough: Vec<f64> = x.iter().map(|p| (25.0 * p[0]).sin()).collect();
        let template = KernelSpec::matern(MaternNu::FiveHalves, 1.0).unwrap();
        let a = fit_kernel_on_design(&template, &[1.0], &x, &smooth, 1e-4).unwrap();
        let b = fit_kernel_on_design(&template, &[1.0], &x, &rough, 1e-4).unwrap();
        assert!(a.lengthscales()[0] > 3.0 * b.lengthscales()[0]);
        assert!(fit_kernel_on_design(&template, &[1.0], &Points::new(1), &[], 1e-4).is_err());
    }
}
