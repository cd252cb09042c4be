use std::time::Instant;

use rand::Rng;

use super::{sanitize, Best, SolverResult};
use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::points::Bounds;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Initial simplex edge as a fraction of each box side.
const INITIAL_STEP: f64 = 0.05;

struct Evaluator<'a> {
    acq: &'a dyn Acquisition,
    domain: &'a Bounds,
    best: Best,
    n_evals: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, x: &mut [f64]) -> Result<f64> {
        self.domain.clip(x);
        let v = sanitize(self.acq.value(x)?);
        self.n_evals += 1;
        self.best.offer(x, v);
        Ok(v)
    }
}

/// Nelder–Mead ascent from `n_starts` uniform starting points, with every
/// trial point clipped to the box. Returns the best point evaluated.
pub fn solve_multistart_simplex<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    n_starts: usize,
    max_inner_iters: usize,
    inner_tol: f64,
    rng: &mut R,
) -> Result<SolverResult> {
    if n_starts == 0 {
        return Err(Error::input("n_starts must be >= 1"));
    }
    if domain.dim() != acq.dim() {
        return Err(Error::input("domain and acquisition dimensions differ"));
    }
    let start = Instant::now();
    let d = domain.dim();
    let starts = domain.sample_points(n_starts, rng);
    let mut ev = Evaluator {
        acq,
        domain,
        best: Best::empty(d),
        n_evals: 0,
    };
    let mut start_values = Vec::with_capacity(n_starts);
    for s in starts.iter() {
        let mut x = s.to_vec();
        start_values.push(ev.eval(&mut x)?);
    }
    if max_inner_iters > 0 {
        for (s, f0) in starts.iter().zip(start_values) {
            nelder_mead(&mut ev, s, f0, max_inner_iters, inner_tol)?;
        }
    }
    let n = ev.n_evals;
    Ok(ev.best.into_result(acq, n, start.elapsed(), None))
}

fn nelder_mead(
    ev: &mut Evaluator<'_>,
    x0: &[f64],
    f0: f64,
    max_iters: usize,
    tol: f64,
) -> Result<()> {
    let d = x0.len();
    let widths = ev.domain.widths();
    let upper = ev.domain.upper().to_vec();

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(d + 1);
    verts.push(x0.to_vec());
    vals.push(f0);
    for j in 0..d {
        let mut v = x0.to_vec();
        let h = INITIAL_STEP * widths[j];
        v[j] += if v[j] + h <= upper[j] { h } else { -h };
        let f = ev.eval(&mut v)?;
        verts.push(v);
        vals.push(f);
    }

    let mut order: Vec<usize> = (0..=d).collect();
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    for _ in 0..max_iters {
        // descending by value; stable so ties keep insertion order
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let (ib, iw, isw) = (order[0], order[d], order[d.saturating_sub(1)]);
        let f_spread = vals[ib] - vals[iw];
        let x_spread = verts
            .iter()
            .flat_map(|v| v.iter().zip(&verts[ib]).zip(&widths).map(|((a, b), w)| {
                if *w > 0.0 {
                    (a - b).abs() / w
                } else {
                    0.0
                }
            }))
            .fold(0.0, f64::max);
        if f_spread.abs() <= tol && x_spread <= tol {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..d] {
            for (c, v) in centroid.iter_mut().zip(&verts[i]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= d as f64);

        let worst = verts[iw].clone();
        let mut reflected = vec![0.0; d];
        for j in 0..d {
            reflected[j] = centroid[j] + REFLECT * (centroid[j] - worst[j]);
        }
        let fr = ev.eval(&mut reflected)?;

        if fr > vals[ib] {
            for j in 0..d {
                trial[j] = centroid[j] + EXPAND * (reflected[j] - centroid[j]);
            }
            let fe = ev.eval(&mut trial)?;
            if fe > fr {
                verts[iw].copy_from_slice(&trial);
                vals[iw] = fe;
            } else {
                verts[iw] = reflected;
                vals[iw] = fr;
            }
            continue;
        }
        if fr > vals[isw] {
            verts[iw] = reflected;
            vals[iw] = fr;
            continue;
        }
        // contraction, outside if the reflection beat the worst vertex
        let outside = fr > vals[iw];
        for j in 0..d {
            let towards = if outside { reflected[j] } else { worst[j] };
            trial[j] = centroid[j] + CONTRACT * (towards - centroid[j]);
        }
        let fc = ev.eval(&mut trial)?;
        let accept = if outside { fc >= fr } else { fc > vals[iw] };
        if accept {
            verts[iw].copy_from_slice(&trial);
            vals[iw] = fc;
            continue;
        }
        let anchor = verts[ib].clone();
        for &i in &order[1..] {
            for j in 0..d {
                verts[i][j] = anchor[j] + SHRINK * (verts[i][j] - anchor[j]);
            }
            vals[i] = ev.eval(&mut verts[i])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::Quadratic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Mutex;

    struct Recording<'a> {
        inner: &'a dyn Acquisition,
        seen: Mutex<Vec<f64>>,
    }

    impl Acquisition for Recording<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            let v = self.inner.value(x)?;
            self.seen.lock().unwrap().push(v);
            Ok(v)
        }
    }

    #[test]
    fn finds_interior_peak_of_quadratic() {
        let domain = Bounds::new(vec![-2.0, 0.0, 1.0], vec![2.0, 3.0, 4.0]).unwrap();
        let acq = Quadratic {
            peak: vec![0.4, 1.7, 2.2],
            shift: 0.0,
        };
        let res = solve_multistart_simplex(&acq, &domain, 5, 400, 1e-10, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let err: f64 = res
            .x_chosen
            .iter()
            .zip(&acq.peak)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-3, "distance to peak {err}");
        assert!(domain.contains(&res.x_chosen));
    }

    #[test]
    fn zero_budget_returns_best_start() {
        let domain = Bounds::unit(2);
        let acq = Quadratic {
            peak: vec![0.5, 0.5],
            shift: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = solve_multistart_simplex(&acq, &domain, 7, 0, 1e-8, &mut rng).unwrap();
        let starts = domain.sample_points(7, &mut ChaCha8Rng::seed_from_u64(2));
        let best = starts
            .iter()
            .map(|s| acq.value(s).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.raw_value, best);
        assert_eq!(res.acq_value, best + 1.0);
        assert_eq!(res.n_evals, 7);
    }

    #[test]
    fn never_worse_than_any_evaluated_point() {
        let domain = Bounds::unit(2);
        let q = Quadratic {
            peak: vec![0.9, 0.1],
            shift: 0.0,
        };
        let rec = Recording {
            inner: &q,
            seen: Mutex::new(Vec::new()),
        };
        let res = solve_multistart_simplex(&rec, &domain, 4, 30, 1e-8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let seen = rec.seen.into_inner().unwrap();
        assert_eq!(seen.len(), res.n_evals);
        let max_seen = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.raw_value, max_seen);
        assert!(seen[..4].iter().all(|v| res.raw_value >= *v));
    }
}
