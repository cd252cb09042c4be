use std::time::Instant;

use rand::Rng;

use super::gradient::polish;
use super::{sanitize, Best, SolverResult};
use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::points::{Bounds, Points};
use crate::sobol::{sobol_in_box, MAX_DIM};

/// Number of best oracle points refined by local ascent.
const POLISH_STARTS: usize = 4;
const POLISH_ITERS: usize = 100;
const POLISH_TOL: f64 = 1e-10;

/// Best point found by the reference search.
#[derive(Debug, Clone)]
pub struct ReferencePoint {
    pub x: Vec<f64>,
    /// Unshifted acquisition value.
    pub raw_value: f64,
    pub n_evals: usize,
}

fn oracle_set<R: Rng + ?Sized>(domain: &Bounds, size: usize, rng: &mut R) -> Result<Points> {
    if domain.dim() <= MAX_DIM {
        sobol_in_box(domain, size, Some(rng.random()))
    } else {
        Ok(domain.sample_points(size, rng))
    }
}

/// Maximizes `acq` over a scrambled low-discrepancy set of `oracle_size`
/// points joined with `touched`, then polishes the best few points with
/// quasi-Newton ascent when a gradient is available.
pub fn reference_search<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    oracle_size: usize,
    touched: Option<&Points>,
    rng: &mut R,
) -> Result<ReferencePoint> {
    if oracle_size == 0 {
        return Err(Error::input("oracle size must be >= 1"));
    }
    if domain.dim() != acq.dim() {
        return Err(Error::input("domain and acquisition dimensions differ"));
    }
    let mut candidates = oracle_set(domain, oracle_size, rng)?;
    if let Some(extra) = touched {
        candidates.extend_from(extra)?;
    }
    let values: Vec<f64> = acq.values(&candidates)?.into_iter().map(sanitize).collect();
    let mut n_evals = candidates.len();

    let mut best = Best::empty(domain.dim());
    for (x, v) in candidates.iter().zip(&values) {
        best.offer(x, *v);
    }
    if acq.is_differentiable() {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let starts: Vec<Vec<f64>> = order
            .iter()
            .take(POLISH_STARTS)
            .map(|&i| candidates.row(i).to_vec())
            .collect();
        let (x, v, n) = polish(acq, domain, &starts, POLISH_ITERS, POLISH_TOL)?;
        n_evals += n;
        best.offer(&x, v);
    }
    Ok(ReferencePoint {
        x: best.x,
        raw_value: best.value,
        n_evals,
    })
}

/// Shifted reference maximum `α*` over the oracle set.
pub fn reference_max<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    oracle_size: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(reference_search(acq, domain, oracle_size, None, rng)?.raw_value + acq.shift())
}

/// The reference search used as a solver in its own right.
pub fn solve_reference<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    oracle_size: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    let start = Instant::now();
    let r = reference_search(acq, domain, oracle_size, None, rng)?;
    let best = Best {
        x: r.x,
        value: r.raw_value,
    };
    Ok(best.into_result(acq, r.n_evals, start.elapsed(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::{Cone, Constant, Quadratic};
    use crate::solvers::{solve_fixed_grid, solve_multistart_simplex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_acquisition_gives_the_constant() {
        let v = reference_max(&Constant(2.5, 3), &Bounds::unit(3), 64, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn superset_of_solver_grid_dominates() {
        let domain = Bounds::unit(2);
        let acq = Cone(vec![0.77, 0.13]);
        for seed in 0..20 {
            let res = solve_fixed_grid(&acq, &domain, 50, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let grid = res.grid_used.clone().unwrap();
            let r = reference_search(&acq, &domain, 16, Some(&grid), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(r.raw_value >= res.raw_value);
        }
    }

    #[test]
    fn unimodal_maximum_is_bracketed() {
        // -‖x - c‖ has max 0; 2^14 Sobol points in the unit square have a
        // fill distance well below 0.02
        let domain = Bounds::unit(2);
        let acq = Cone(vec![0.31, 0.62]);
        let v = reference_max(&acq, &domain, 1 << 14, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!((-0.02..=0.0).contains(&v), "{v}");
    }

    #[test]
    fn polish_reaches_smooth_peak_and_beats_simplex() {
        let domain = Bounds::unit(3);
        let acq = Quadratic {
            peak: vec![0.123, 0.456, 0.789],
            shift: 1.0,
        };
        let v = reference_max(&acq, &domain, 256, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let nm = solve_multistart_simplex(&acq, &domain, 3, 20, 1e-8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(v >= nm.acq_value);
        let as_solver = solve_reference(&acq, &domain, 256, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(as_solver.acq_value, v);
        assert!(domain.contains(&as_solver.x_chosen));
    }
}
