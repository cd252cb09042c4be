use std::time::Instant;

use rand::Rng;

use super::{sanitize, Best, SolverResult};
use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::points::{Bounds, Points};

/// `c·t^p`, exactly `c·t` for `p = 1`.
pub fn uniform_grid_size(c: usize, exponent: f64, t: usize) -> usize {
    let t = t.max(1);
    if exponent == 1.0 {
        c * t
    } else {
        ((c as f64) * (t as f64).powf(exponent)).round().max(1.0) as usize
    }
}

/// `size` independent uniform points in `domain`.
pub fn draw_grid<R: Rng + ?Sized>(domain: &Bounds, size: usize, rng: &mut R) -> Points {
    domain.sample_points(size, rng)
}

/// Exhaustive maximization over a given candidate list.
pub fn scan_candidates(acq: &dyn Acquisition, candidates: Points) -> Result<SolverResult> {
    let start = Instant::now();
    if candidates.is_empty() {
        return Err(Error::input("candidate set is empty"));
    }
    let values = acq.values(&candidates)?;
    let mut best = Best::empty(candidates.dim());
    for (x, v) in candidates.iter().zip(values) {
        best.offer(x, sanitize(v));
    }
    let n = candidates.len();
    Ok(best.into_result(acq, n, start.elapsed(), Some(candidates)))
}

fn solve_grid<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    size: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    if domain.dim() != acq.dim() {
        return Err(Error::input("domain and acquisition dimensions differ"));
    }
    let start = Instant::now();
    let grid = draw_grid(domain, size.max(1), rng);
    let mut res = scan_candidates(acq, grid)?;
    res.wall_time = start.elapsed();
    Ok(res)
}

/// Random grid of `c·t` fresh uniform points at iteration `t`.
pub fn solve_uniform_grid<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    t: usize,
    c: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    if t == 0 || c == 0 {
        return Err(Error::input("uniform grid needs t >= 1 and c >= 1"));
    }
    solve_grid(acq, domain, c * t, rng)
}

/// Random grid of constant size.
pub fn solve_fixed_grid<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    size: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    if size == 0 {
        return Err(Error::input("fixed grid size must be >= 1"));
    }
    solve_grid(acq, domain, size, rng)
}

pub(super) fn solve_sized_grid<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    size: usize,
    rng: &mut R,
) -> Result<SolverResult> {
    solve_grid(acq, domain, size, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::{Cone, Constant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_acquisition_returns_first_point() {
        let domain = Bounds::unit(2);
        let acq = Constant(3.0, 2);
        let res = solve_uniform_grid(&acq, &domain, 4, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let grid = res.grid_used.as_ref().unwrap();
        assert_eq!(res.x_chosen, grid.row(0));
        assert_eq!(res.acq_value, 3.0);
        assert_eq!(res.n_evals, 20);
    }

    #[test]
    fn grid_size_follows_schedule() {
        let domain = Bounds::unit(3);
        let acq = Constant(0.0, 3);
        let res = solve_uniform_grid(&acq, &domain, 7, 100, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(res.n_evals, 700);
        assert_eq!(res.grid_used.unwrap().len(), 700);
        assert_eq!(uniform_grid_size(100, 1.0, 7), 700);
        assert_eq!(uniform_grid_size(1, 2.0, 7), 49);
    }

    #[test]
    fn cone_peak_matches_brute_force() {
        let domain = Bounds::unit(2);
        let acq = Cone(vec![0.3, 0.8]);
        let res = solve_uniform_grid(&acq, &domain, 4096, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let grid = res.grid_used.as_ref().unwrap();
        // independent linear scan of the same grid
        let mut best_i = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, p) in grid.iter().enumerate() {
            let v = -((p[0] - 0.3).powi(2) + (p[1] - 0.8).powi(2)).sqrt();
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        assert_eq!(res.x_chosen, grid.row(best_i));
        assert_eq!(res.acq_value, best_v);
        assert!(-res.acq_value < 0.05);
    }

    #[test]
    fn fixed_grid_edge_cases() {
        let domain = Bounds::unit(2);
        let acq = Cone(vec![0.5, 0.5]);
        let one = solve_fixed_grid(&acq, &domain, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(one.x_chosen, one.grid_used.as_ref().unwrap().row(0));
        let a = solve_fixed_grid(&acq, &domain, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = solve_fixed_grid(&acq, &domain, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.x_chosen, b.x_chosen);
        assert_eq!(a.grid_used, b.grid_used);
        assert!(solve_fixed_grid(&acq, &domain, 0, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }
}
