//! Gaussian-process Bayesian optimization with an explicit, instrumented
//! acquisition maximizer.
//!
//! The crate is organized bottom-up:
//!
//! * [`kernels`]: SE and Matérn covariance functions with gradients.
//! * [`gp`]: exact posterior with incremental Cholesky updates and joint
//!   grid sampling.
//! * [`acquisition`]: UCB surfaces, Thompson grid samples, β schedules and
//!   the nonnegativity shifts that make solution accuracy well defined.
//! * [`solvers`]: random growing grid, fixed grid, multi-start simplex,
//!   multi-start gradient ascent, and the dense reference maximizer.
//! * [`metrics`]: regret, the inaccuracy ledger and realized information gain.
//! * [`objectives`]: benchmark functions and the noise model.
//! * [`engine`]: the optimization loop and replicate runner.

pub mod acquisition;
pub mod engine;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod metrics;
pub mod objectives;
pub mod points;
pub mod rng;
pub mod sobol;
pub mod solvers;

pub use error::{Error, Result};
pub use gp::GpPosterior;
pub use kernels::{KernelFamily, KernelSpec, MaternNu};
pub use points::{Bounds, Points};
