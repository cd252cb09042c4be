//! Regret accounting, the inaccuracy ledger and realized information gain.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::points::Bounds;

/// `r_t = f* − f(x_t)` on noise-free values.
pub fn instantaneous_regret(f_star: f64, f_xt: f64) -> f64 {
    f_star - f_xt
}

/// Running sums of `regrets`.
pub fn cumulative(regrets: &[f64]) -> Vec<f64> {
    regrets
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// `f* − max_t f(x_t)` over noise-free values.
pub fn simple_regret(f_star: f64, values: &[f64]) -> Result<f64> {
    values
        .iter()
        .copied()
        .reduce(f64::max)
        .map(|best| f_star - best)
        .ok_or_else(|| Error::input("simple regret of an empty trace"))
}

/// `½ log det(I + τ⁻¹K_t)` for every prefix `t = 1..n` of the posterior's
/// data, read off the diagonal of its Cholesky factor.
pub fn realized_info_gain(gp: &GpPosterior) -> Vec<f64> {
    let tau = gp.noise() + gp.jitter();
    let half_log_tau = 0.5 * tau.ln();
    let l = gp.chol();
    (0..gp.len())
        .scan(0.0, |acc, i| {
            *acc += l[(i, i)].ln() - half_log_tau;
            Some(*acc)
        })
        .collect()
}

/// Realized information gain of the full data set (0 for an empty one).
pub fn info_gain(gp: &GpPosterior) -> f64 {
    let tau = gp.noise() + gp.jitter();
    let l = gp.chol();
    (0..gp.len()).map(|i| l[(i, i)].ln()).sum::<f64>() - 0.5 * gp.len() as f64 * tau.ln()
}

/// `η̂ = achieved / reference`, both shifted.
pub fn eta_hat(achieved: f64, reference: f64) -> f64 {
    achieved / reference
}

/// Per-iteration accuracy bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InaccuracyLedger {
    /// Measured `η̂_t`, when the oracle ran.
    pub eta: Vec<Option<f64>>,
    /// Configured floor `η̃_t`.
    pub eta_floor: Vec<f64>,
    /// Running `Σ(1 − η̃_s)`.
    pub m: Vec<f64>,
    /// Running `Σ(1 − η̂_s)`; `None` from the first unmeasured iteration on.
    pub m_hat: Vec<Option<f64>>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl InaccuracyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, eta: Option<f64>, eta_floor: f64, beta: f64, gamma: f64) {
        let m_prev = self.m.last().copied().unwrap_or(0.0);
        let m_hat_prev = if self.m_hat.is_empty() {
            Some(0.0)
        } else {
            self.m_hat[self.m_hat.len() - 1]
        };
        self.eta.push(eta);
        self.eta_floor.push(eta_floor);
        self.m.push(m_prev + (1.0 - eta_floor));
        self.m_hat.push(m_hat_prev.zip(eta).map(|(m, e)| m + (1.0 - e)));
        self.beta.push(beta);
        self.gamma.push(gamma);
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Final `M̂_T`, if every iteration was measured.
    pub fn m_hat_total(&self) -> Option<f64> {
        self.m_hat.last().copied().flatten()
    }
}

/// R_T/T at the quartile horizons plus a log-log growth fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublinearityReport {
    /// Horizons `⌈T/4⌉, ⌈T/2⌉, ⌈3T/4⌉, T`.
    pub horizons: [usize; 4],
    /// `R_t / t` at those horizons.
    pub average: [f64; 4],
    /// Least-squares slope of `log R_t` on `log t` over the final half.
    pub slope: f64,
    pub sublinear: bool,
}

/// Slope above which growth is treated as linear.
pub const LINEAR_SLOPE: f64 = 0.98;

/// Diagnoses whether a cumulative-regret sequence (index `i` is `t = i+1`)
/// looks sublinear. Nonpositive entries are left out of the log fit; a
/// sequence that never becomes positive has slope 0.
pub fn sublinearity_diagnostic(cum: &[f64]) -> Result<SublinearityReport> {
    let n = cum.len();
    if n < 10 {
        return Err(Error::input("sublinearity diagnostic needs at least 10 values"));
    }
    let horizons = [n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
    let average = horizons.map(|t| cum[t - 1] / t as f64);

    let half = n.div_ceil(2);
    let pts: Vec<(f64, f64)> = (half..=n)
        .filter(|&t| cum[t - 1] > 0.0)
        .map(|t| ((t as f64).ln(), cum[t - 1].ln()))
        .collect();
    let slope = if pts.len() < 2 {
        0.0
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    };
    let decreasing = average[3] < average[1] || (average[3] == 0.0 && average[1] == 0.0);
    Ok(SublinearityReport {
        horizons,
        average,
        slope,
        sublinear: slope < LINEAR_SLOPE && decreasing,
    })
}

/// One BO iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub x: Vec<f64>,
    /// Observation (noisy if the run is noisy).
    pub y: f64,
    /// Noise-free objective value at `x`.
    pub f_x: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub eta_hat: Option<f64>,
    pub eta_floor: f64,
    pub beta: f64,
    /// Realized information gain before this iteration's observation.
    pub gamma: f64,
    pub shift: f64,
    /// Shifted acquisition value reached by the solver.
    pub acq_value: f64,
    /// Shifted reference maximum, when measured.
    pub reference_value: Option<f64>,
    /// Acquisition construction time (the TS joint draw, the UCB setup).
    pub build_time: Duration,
    pub solve_time: Duration,
    pub n_evals: usize,
}

/// Complete record of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub function: String,
    pub algorithm: String,
    pub solver: String,
    pub seed: u64,
    pub f_star: f64,
    pub domain: Bounds,
    pub records: Vec<IterationRecord>,
    /// Resolved configuration and decision flags.
    pub metadata: BTreeMap<String, String>,
}

impl RunTrace {
    pub fn regrets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.regret).collect()
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_regret).collect()
    }

    pub fn simple_regret(&self) -> Result<f64> {
        let vals: Vec<f64> = self.records.iter().map(|r| r.f_x).collect();
        simple_regret(self.f_star, &vals)
    }

    pub fn total_solve_time(&self) -> Duration {
        self.records.iter().map(|r| r.solve_time).sum()
    }

    pub fn total_build_time(&self) -> Duration {
        self.records.iter().map(|r| r.build_time).sum()
    }

    pub fn ledger(&self) -> InaccuracyLedger {
        let mut l = InaccuracyLedger::new();
        for r in &self.records {
            l.push(r.eta_hat, r.eta_floor, r.beta, r.gamma);
        }
        l
    }

    /// Checks that every `R_t` equals the running sum of the `r_s` exactly.
    pub fn accounting_is_exact(&self) -> bool {
        cumulative(&self.regrets()) == self.cumulative_regret()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::points::Points;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_gain(x: &Points, kernel: &KernelSpec, tau: f64) -> f64 {
        let k = kernel.gram(x).unwrap();
        let n = x.len();
        let m = DMatrix::<f64>::identity(n, n) + k / tau;
        0.5 * m.determinant().ln()
    }

    #[test]
    fn regret_examples() {
        assert_eq!(instantaneous_regret(1.5, 1.5), 0.0);
        assert_eq!(cumulative(&[1.0, 0.5, 0.25]), vec![1.0, 1.5, 1.75]);
        assert_eq!(simple_regret(2.0, &[1.0, 1.8, 0.3]).unwrap(), 2.0 - 1.8);
        assert!(simple_regret(0.0, &[]).is_err());
    }

    #[test]
    fn single_point_gain_is_half_log_two() {
        let x = Points::from_rows(&[[0.3, 0.3]]).unwrap();
        let gp = GpPosterior::new(KernelSpec::squared_exponential(0.5).unwrap(), 1.0, x, &[0.0]).unwrap();
        assert!((info_gain(&gp) - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!((realized_info_gain(&gp)[0] - 0.346_57).abs() < 1e-5);
    }

    #[test]
    fn huge_noise_gives_vanishing_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Bounds::unit(2).sample_points(5, &mut rng);
        let gp = GpPosterior::new(KernelSpec::squared_exponential(0.5).unwrap(), 1e12, x, &[0.0; 5]).unwrap();
        assert!(info_gain(&gp) < 1e-10);
    }

    #[test]
    fn prefix_gain_matches_dense_log_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kernel = KernelSpec::matern(crate::kernels::MaternNu::FiveHalves, 0.4).unwrap();
        let x = Bounds::unit(3).sample_points(40, &mut rng);
        let y: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        // build incrementally so the factor comes from border updates
        let mut gp = GpPosterior::prior(kernel.clone(), 1e-2, 3).unwrap();
        for (p, v) in x.iter().zip(&y) {
            gp.update_in_place(p, *v).unwrap();
        }
        let prefix = realized_info_gain(&gp);
        for t in [1, 5, 17, 40] {
            let sub = Points::from_rows(&x.to_rows()[..t]).unwrap();
            assert!((prefix[t - 1] - dense_gain(&sub, &kernel, 1e-2)).abs() < 1e-8, "t={t}");
        }
        assert!(prefix.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(info_gain(&gp), prefix[39]);
    }

    #[test]
    fn ledger_accumulates() {
        let mut l = InaccuracyLedger::new();
        l.push(Some(0.5), 0.9, 1.0, 0.1);
        l.push(Some(1.0), 0.8, 1.1, 0.2);
        assert!((l.m[1] - 0.3).abs() < 1e-15);
        assert_eq!(l.m_hat_total(), Some(0.5));
        l.push(None, 1.0, 1.2, 0.3);
        assert_eq!(l.m_hat_total(), None);
        assert_eq!(l.len(), 3);
    }

    #[test]
    fn diagnostic_examples() {
        let linear: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        let r = sublinearity_diagnostic(&linear).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-12);
        assert!(!r.sublinear);

        let root: Vec<f64> = (1..=100).map(|t| (t as f64).sqrt()).collect();
        let r = sublinearity_diagnostic(&root).unwrap();
        assert!((r.slope - 0.5).abs() < 1e-12);
        assert!(r.sublinear);

        let log: Vec<f64> = (1..=100).map(|t| (1.0 + t as f64).ln()).collect();
        let r = sublinearity_diagnostic(&log).unwrap();
        assert!(r.slope < 0.3 && r.sublinear);
        assert_eq!(r.horizons, [25, 50, 75, 100]);

        assert!(sublinearity_diagnostic(&[1.0; 9]).is_err());
        assert!(sublinearity_diagnostic(&[0.0; 12]).unwrap().sublinear);
    }

    proptest! {
        #[test]
        fn simple_regret_bounded_by_average(vals in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let f_star = 5.0;
            let regrets: Vec<f64> = vals.iter().map(|v| instantaneous_regret(f_star, *v)).collect();
            let cum = cumulative(&regrets);
            let mut prev = f64::INFINITY;
            for t in 1..=vals.len() {
                let s = simple_regret(f_star, &vals[..t]).unwrap();
                prop_assert!(s <= cum[t - 1] / t as f64 + 1e-12);
                prop_assert!(s <= prev);
                prev = s;
            }
        }

        #[test]
        fn ledger_stays_in_bounds(etas in prop::collection::vec((1e-6f64..=1.0, 1e-6f64..=1.0), 1..80)) {
            let mut l = InaccuracyLedger::new();
            for (e, floor) in &etas {
                l.push(Some(*e), *floor, 1.0, 0.0);
            }
            for t in 0..l.len() {
                let m_hat = l.m_hat[t].unwrap();
                prop_assert!(m_hat >= 0.0 && m_hat <= (t + 1) as f64);
                prop_assert!(l.m[t] >= 0.0 && l.m[t] <= (t + 1) as f64);
                if t > 0 {
                    prop_assert!(l.m[t] >= l.m[t - 1]);
                    prop_assert!(m_hat >= l.m_hat[t - 1].unwrap());
                }
            }
        }
    }
}
