//! Stationary covariance kernels: squared exponential and half-integer
//! Matérn, with analytic input gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Matérn smoothness; only the half-integer closed forms are provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    ThreeHalves,
    FiveHalves,
    SevenHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
            MaternNu::SevenHalves => 3.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Matern(MaternNu),
}

/// Kernel family plus hyperparameters. Hyperparameters are fixed for the
/// lifetime of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    /// One entry (isotropic) or one per input dimension (ARD).
    lengthscales: Vec<f64>,
    output_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, output_scale: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::input("kernel needs at least one lengthscale"));
        }
        if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::input("lengthscales must be finite and positive"));
        }
        if !(output_scale.is_finite() && output_scale > 0.0) {
            return Err(Error::input("output scale must be finite and positive"));
        }
        Ok(Self {
            family,
            lengthscales,
            output_scale,
        })
    }

    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, vec![lengthscale], 1.0)
    }

    pub fn matern(nu: MaternNu, lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern(nu), vec![lengthscale], 1.0)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Whether the kernel satisfies the smoothness the regret theory needs
    /// (SE, or Matérn with ν ≥ 2). ν = 3/2 is usable but outside it.
    pub fn within_theory(&self) -> bool {
        match self.family {
            KernelFamily::SquaredExponential => true,
            KernelFamily::Matern(nu) => nu.value() >= 2.0,
        }
    }

    /// k(x, x), the same everywhere for a stationary kernel.
    pub fn diag(&self) -> f64 {
        self.output_scale
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != y.len() {
            return Err(Error::input(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                y.len()
            )));
        }
        if self.lengthscales.len() != 1 && self.lengthscales.len() != x.len() {
            return Err(Error::input(format!(
                "kernel has {} lengthscales but points have dimension {}",
                self.lengthscales.len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Checks that points of dimension `dim` are compatible with this kernel.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != 1 && self.lengthscales.len() != dim {
            return Err(Error::input(format!(
                "kernel has {} lengthscales but points have dimension {dim}",
                self.lengthscales.len()
            )));
        }
        Ok(())
    }

    #[inline]
    fn ls(&self, j: usize) -> f64 {
        if self.lengthscales.len() == 1 {
            self.lengthscales[0]
        } else {
            self.lengthscales[j]
        }
    }

    /// Scaled squared distance Σ ((x_j - y_j)/ℓ_j)².
    #[inline]
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.lengthscales.len() == 1 {
            let inv = 1.0 / self.lengthscales[0];
            x.iter()
                .zip(y)
                .map(|(a, b)| {
                    let d = (a - b) * inv;
                    d * d
                })
                .sum()
        } else {
            x.iter()
                .zip(y)
                .zip(&self.lengthscales)
                .map(|((a, b), l)| {
                    let d = (a - b) / l;
                    d * d
                })
                .sum()
        }
    }

    /// Unit-scale kernel value as a function of the scaled squared distance.
    #[inline]
    fn profile(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern(nu) => {
                let r = r2.sqrt();
                match nu {
                    MaternNu::ThreeHalves => {
                        let a = 3f64.sqrt() * r;
                        (1.0 + a) * (-a).exp()
                    }
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * r;
                        (1.0 + a + a * a / 3.0) * (-a).exp()
                    }
                    MaternNu::SevenHalves => {
                        let a = 7f64.sqrt() * r;
                        (1.0 + a + 0.4 * a * a + a * a * a / 15.0) * (-a).exp()
                    }
                }
            }
        }
    }

    /// (dk/dr)/r for the unit-scale kernel; finite at r = 0.
    #[inline]
    fn profile_slope_over_r(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => -(-0.5 * r2).exp(),
            KernelFamily::Matern(nu) => {
                let r = r2.sqrt();
                match nu {
                    MaternNu::ThreeHalves => -3.0 * (-(3f64.sqrt()) * r).exp(),
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * r;
                        -(5.0 / 3.0) * (1.0 + a) * (-a).exp()
                    }
                    MaternNu::SevenHalves => {
                        let a = 7f64.sqrt() * r;
                        -(7.0 / 15.0) * (3.0 + 3.0 * a + a * a) * (-a).exp()
                    }
                }
            }
        }
    }

    /// k(x, y) without dimension checks; for hot loops over validated data.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.output_scale * self.profile(self.scaled_sq_dist(x, y))
    }

    /// k(x, y).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dims(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// ∂k(x, y)/∂x written into `out`, without dimension checks.
    #[inline]
    pub fn grad_into_unchecked(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = self.output_scale * self.profile_slope_over_r(self.scaled_sq_dist(x, y));
        for (j, o) in out.iter_mut().enumerate() {
            let l = self.ls(j);
            *o = s * (x[j] - y[j]) / (l * l);
        }
    }

    /// ∂k(x, y)/∂x. Zero at x = y.
    pub fn grad(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, y)?;
        let mut out = vec![0.0; x.len()];
        self.grad_into_unchecked(x, y, &mut out);
        Ok(out)
    }

    /// Gram matrix [k(x_i, x_j)].
    pub fn gram(&self, xs: &Points) -> Result<DMatrix<f64>> {
        if xs.is_empty() {
            return Err(Error::input("gram matrix of an empty point set"));
        }
        self.check_dim(xs.dim())?;
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.diag();
            for j in 0..i {
                let v = self.eval_unchecked(xs.row(i), xs.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Cross-covariance matrix [k(a_i, b_j)] of shape |a| × |b|.
    pub fn cross(&self, a: &Points, b: &Points) -> DMatrix<f64> {
        let (m, n) = (a.len(), b.len());
        let mut k = DMatrix::zeros(m, n);
        for j in 0..n {
            let bj = b.row(j);
            for i in 0..m {
                k[(i, j)] = self.eval_unchecked(a.row(i), bj);
            }
        }
        k
    }
}
