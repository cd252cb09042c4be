//! Acquisition maximizers.
//!
//! Every solver maximizes the *unshifted* acquisition, breaks ties towards
//! the lowest candidate index, keeps its iterates inside the search box and
//! reports the shifted value of the point it returns.

mod fill;
mod gradient;
mod grid;
mod oracle;
mod simplex;

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::points::{Bounds, Points};

pub use fill::{fill_distance, NearestNeighbors};
pub use gradient::solve_multistart_gradient;
pub use grid::{draw_grid, scan_candidates, solve_fixed_grid, solve_uniform_grid, uniform_grid_size};
pub use oracle::{reference_max, reference_search, solve_reference, ReferencePoint};
pub use simplex::solve_multistart_simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Fresh uniform grid of `c·t` points at iteration `t`.
    UniformGrid,
    /// Fresh uniform grid of constant size.
    FixedGrid,
    /// Multi-start Nelder–Mead.
    MultiStartSimplex,
    /// Multi-start projected gradient (or quasi-Newton) ascent.
    MultiStartGradient,
    /// Dense low-discrepancy set plus local polish; used to define α*.
    ReferenceOracle,
}

/// Local-search direction rule for [`SolverKind::MultiStartGradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AscentRule {
    /// Steepest ascent with backtracking.
    Steepest,
    /// Projected BFGS with backtracking.
    QuasiNewton,
}

/// Solver choice and its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverKind,
    /// `c` in `|X_t| = c·t^p`.
    pub grid_coefficient: usize,
    /// `p` in `|X_t| = c·t^p`; 1 gives the linear schedule.
    pub grid_exponent: f64,
    pub fixed_size: usize,
    pub n_starts: usize,
    pub max_inner_iters: usize,
    pub inner_tol: f64,
    pub ascent: AscentRule,
    /// Low-discrepancy points used by the reference oracle.
    pub oracle_size: usize,
}

impl SolverSpec {
    /// Defaults for a problem of dimension `dim`: `c = 100`, fixed size 100,
    /// `10·d` starts, 200 inner iterations, tolerance 1e-8.
    pub fn defaults(kind: SolverKind, dim: usize) -> Self {
        Self {
            kind,
            grid_coefficient: 100,
            grid_exponent: 1.0,
            fixed_size: 100,
            n_starts: 10 * dim.max(1),
            max_inner_iters: 200,
            inner_tol: 1e-8,
            ascent: AscentRule::Steepest,
            oracle_size: 100_000,
        }
    }

    pub fn uniform_grid(c: usize) -> Self {
        Self {
            grid_coefficient: c,
            ..Self::defaults(SolverKind::UniformGrid, 1)
        }
    }

    pub fn fixed_grid(size: usize) -> Self {
        Self {
            fixed_size: size,
            ..Self::defaults(SolverKind::FixedGrid, 1)
        }
    }

    /// Label used in result files.
    pub fn label(&self) -> &'static str {
        match (self.kind, self.ascent) {
            (SolverKind::UniformGrid, _) => "uniform-grid",
            (SolverKind::FixedGrid, _) => "fixed-grid",
            (SolverKind::MultiStartSimplex, _) => "simplex-multistart",
            (SolverKind::MultiStartGradient, AscentRule::Steepest) => "gradient-multistart",
            (SolverKind::MultiStartGradient, AscentRule::QuasiNewton) => "quasi-newton-multistart",
            (SolverKind::ReferenceOracle, _) => "reference-oracle",
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, SolverKind::UniformGrid | SolverKind::FixedGrid)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SolverKind::UniformGrid => {
                if self.grid_coefficient == 0 {
                    return Err(Error::config("grid coefficient must be >= 1"));
                }
                if !(self.grid_exponent.is_finite() && self.grid_exponent > 0.0) {
                    return Err(Error::config("grid exponent must be positive"));
                }
            }
            SolverKind::FixedGrid if self.fixed_size == 0 => {
                return Err(Error::config("fixed grid size must be >= 1"));
            }
            SolverKind::MultiStartSimplex | SolverKind::MultiStartGradient => {
                if self.n_starts == 0 {
                    return Err(Error::config("n_starts must be >= 1"));
                }
                if !(self.inner_tol.is_finite() && self.inner_tol > 0.0) {
                    return Err(Error::config("inner tolerance must be positive"));
                }
            }
            SolverKind::ReferenceOracle if self.oracle_size == 0 => {
                return Err(Error::config("oracle size must be >= 1"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Grid size at iteration `t` for grid solvers.
    pub fn grid_size(&self, t: usize) -> Option<usize> {
        match self.kind {
            SolverKind::UniformGrid => Some(uniform_grid_size(
                self.grid_coefficient,
                self.grid_exponent,
                t,
            )),
            SolverKind::FixedGrid => Some(self.fixed_size),
            _ => None,
        }
    }
}

/// Outcome of one acquisition maximization.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_chosen: Vec<f64>,
    /// Shifted acquisition value at `x_chosen`.
    pub acq_value: f64,
    /// Unshifted acquisition value at `x_chosen`.
    pub raw_value: f64,
    pub n_evals: usize,
    pub wall_time: Duration,
    /// Candidate grid, for grid solvers.
    pub grid_used: Option<Points>,
}

/// Runs the solver described by `spec` at iteration `t`.
///
/// Thompson samples only exist on their own grid; use [`scan_candidates`]
/// for them.
pub fn solve<R: Rng + ?Sized>(
    spec: &SolverSpec,
    acq: &dyn Acquisition,
    domain: &Bounds,
    t: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    match spec.kind {
        SolverKind::UniformGrid => {
            if t == 0 {
                return Err(Error::input("iteration index must be >= 1"));
            }
            grid::solve_sized_grid(
                acq,
                domain,
                uniform_grid_size(spec.grid_coefficient, spec.grid_exponent, t),
                rng,
            )
        }
        SolverKind::FixedGrid => solve_fixed_grid(acq, domain, spec.fixed_size, rng),
        SolverKind::MultiStartSimplex => solve_multistart_simplex(
            acq,
            domain,
            spec.n_starts,
            spec.max_inner_iters,
            spec.inner_tol,
            rng,
        ),
        SolverKind::MultiStartGradient => solve_multistart_gradient(
            acq,
            domain,
            spec.n_starts,
            spec.max_inner_iters,
            spec.inner_tol,
            spec.ascent,
            rng,
        ),
        SolverKind::ReferenceOracle => solve_reference(acq, domain, spec.oracle_size, rng),
    }
}

/// Tracks the best unshifted value seen, breaking ties towards the first.
#[derive(Debug, Clone)]
pub(crate) struct Best {
    pub x: Vec<f64>,
    pub value: f64,
}

impl Best {
    pub fn empty(dim: usize) -> Self {
        Self {
            x: vec![f64::NAN; dim],
            value: f64::NEG_INFINITY,
        }
    }

    pub fn offer(&mut self, x: &[f64], value: f64) {
        if value > self.value || (self.value == f64::NEG_INFINITY && self.x[0].is_nan()) {
            self.value = value;
            self.x.copy_from_slice(x);
        }
    }

    pub fn into_result(
        self,
        acq: &dyn Acquisition,
        n_evals: usize,
        wall_time: Duration,
        grid_used: Option<Points>,
    ) -> SolverResult {
        SolverResult {
            acq_value: self.value + acq.shift(),
            raw_value: self.value,
            x_chosen: self.x,
            n_evals,
            wall_time,
            grid_used,
        }
    }
}

/// NaN-safe view of an acquisition value for comparisons.
#[inline]
pub(crate) fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}
