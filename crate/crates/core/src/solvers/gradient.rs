use std::time::Instant;

use rand::Rng;

use super::{sanitize, AscentRule, Best, SolverResult};
use crate::acquisition::Acquisition;
use crate::error::{Error, Result};
use crate::points::Bounds;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;
/// First trial step moves at most this fraction of the box diagonal.
const FIRST_STEP: f64 = 0.1;

struct Counter<'a> {
    acq: &'a dyn Acquisition,
    best: Best,
    n_evals: usize,
}

impl Counter<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.acq.value_grad(x)?;
        let v = sanitize(v);
        self.n_evals += 1;
        self.best.offer(x, v);
        Ok((v, g))
    }
}

/// Projected ascent with Armijo backtracking from `n_starts` uniform
/// starts. [`AscentRule::QuasiNewton`] replaces the steepest direction with
/// a BFGS inverse-Hessian direction, reset whenever it stops ascending.
pub fn solve_multistart_gradient<R: Rng + ?Sized>(
    acq: &dyn Acquisition,
    domain: &Bounds,
    n_starts: usize,
    max_inner_iters: usize,
    inner_tol: f64,
    rule: AscentRule,
    rng: &mut R,
) -> Result<SolverResult> {
    if !acq.is_differentiable() {
        return Err(Error::input(
            "gradient solver needs an acquisition with an analytic gradient",
        ));
    }
    if n_starts == 0 {
        return Err(Error::input("n_starts must be >= 1"));
    }
    if domain.dim() != acq.dim() {
        return Err(Error::input("domain and acquisition dimensions differ"));
    }
    let start = Instant::now();
    let starts = domain.sample_points(n_starts, rng);
    let mut counter = Counter {
        acq,
        best: Best::empty(domain.dim()),
        n_evals: 0,
    };
    for s in starts.iter() {
        ascend(&mut counter, domain, s, max_inner_iters, inner_tol, rule)?;
    }
    let n = counter.n_evals;
    Ok(counter.best.into_result(acq, n, start.elapsed(), None))
}

/// Quasi-Newton polish from each row of `starts`; returns the best point
/// seen (unshifted value) and the number of evaluations.
pub(super) fn polish(
    acq: &dyn Acquisition,
    domain: &Bounds,
    starts: &[Vec<f64>],
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut counter = Counter {
        acq,
        best: Best::empty(domain.dim()),
        n_evals: 0,
    };
    for s in starts {
        ascend(&mut counter, domain, s, max_iters, tol, AscentRule::QuasiNewton)?;
    }
    Ok((counter.best.x, counter.best.value, counter.n_evals))
}

/// Box-projected direction: components pushing out of an active bound are
/// dropped.
fn project_direction(domain: &Bounds, x: &[f64], p: &mut [f64]) {
    for (j, pj) in p.iter_mut().enumerate() {
        if (x[j] <= domain.lower()[j] && *pj < 0.0) || (x[j] >= domain.upper()[j] && *pj > 0.0) {
            *pj = 0.0;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn ascend(
    c: &mut Counter<'_>,
    domain: &Bounds,
    x0: &[f64],
    max_iters: usize,
    tol: f64,
    rule: AscentRule,
) -> Result<Vec<f64>> {
    let d = x0.len();
    let diam = domain.diameter().max(f64::MIN_POSITIVE);
    let mut x = x0.to_vec();
    domain.clip(&mut x);
    let (mut f, mut g) = c.eval(&x)?;
    // inverse Hessian of -f, row-major; only used by the quasi-Newton rule
    let mut h = identity(d);
    let mut h_fresh = true;
    let mut step = f64::NAN;
    let mut p = vec![0.0; d];
    let mut trial = vec![0.0; d];

    for _ in 0..max_iters {
        if !g.iter().all(|v| v.is_finite()) {
            break;
        }
        match rule {
            AscentRule::Steepest => p.copy_from_slice(&g),
            AscentRule::QuasiNewton => mat_vec(&h, &g, &mut p),
        }
        project_direction(domain, &x, &mut p);
        let mut slope = dot(&g, &p);
        if rule == AscentRule::QuasiNewton && !(slope > 0.0) && !h_fresh {
            h = identity(d);
            h_fresh = true;
            p.copy_from_slice(&g);
            project_direction(domain, &x, &mut p);
            slope = dot(&g, &p);
        }
        let pn = norm(&p);
        if !(slope > 0.0) || pn == 0.0 {
            break;
        }
        step = match rule {
            AscentRule::QuasiNewton if !h_fresh => 1.0,
            _ if step.is_finite() => step,
            _ => FIRST_STEP * diam / pn,
        };

        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            for j in 0..d {
                trial[j] = x[j] + step * p[j];
            }
            domain.clip(&mut trial);
            let moved: f64 = dot(&g, &sub(&trial, &x));
            let (ft, gt) = c.eval(&trial)?;
            if ft >= f + ARMIJO * moved && moved > 0.0 {
                accepted = Some((ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((ft, gt)) = accepted else {
            if rule == AscentRule::QuasiNewton && !h_fresh {
                h = identity(d);
                h_fresh = true;
                step = f64::NAN;
                continue;
            }
            break;
        };

        let s = sub(&trial, &x);
        let moved = norm(&s);
        if rule == AscentRule::QuasiNewton {
            // curvature pair for -f: y = ∇(-f)(new) - ∇(-f)(old)
            let y = sub(&g, &gt);
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
                bfgs_update(&mut h, &s, &y, sy);
                h_fresh = false;
            }
        } else {
            step *= 2.0;
        }
        x.copy_from_slice(&trial);
        f = ft;
        g = gt;
        if moved <= tol * diam {
            break;
        }
    }
    Ok(x)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        out[i] = dot(&m[i * d..(i + 1) * d], v);
    }
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let mut hy = vec![0.0; d];
    mat_vec(h, y, &mut hy);
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
