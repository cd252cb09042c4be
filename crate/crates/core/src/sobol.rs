//! Sobol low-discrepancy sequence (Gray-code construction) with optional
//! random digital shift.

use rand::Rng;

use crate::error::{Error, Result};
use crate::points::{Bounds, Points};
use crate::rng::{substream, Purpose};

const BITS: usize = 32;

/// Primitive-polynomial data `(degree, coefficients, initial direction
/// numbers)` for dimensions 2.. from the Joe-Kuo `new-joe-kuo-6.21201` table.
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

/// Largest supported dimension.
pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

/// Incremental Sobol generator on `[0,1)^d`.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// Unscrambled sequence; the first point is the origin.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::input(format!(
                "Sobol sequence supports dimensions 1..={MAX_DIM}, got {dim}"
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in &DIRECTIONS[..dim - 1] {
            directions.push(direction_numbers(s as usize, a, m));
        }
        Ok(Self {
            directions,
            state: vec![0; dim],
            shift: vec![0; dim],
            index: 0,
        })
    }

    /// Sequence XOR-shifted by a per-dimension random word drawn from
    /// `seed`. Digital shifts preserve the net structure.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dim)?;
        let mut rng = substream(seed, Purpose::InitDesign, 0);
        for sh in &mut s.shift {
            *sh = rng.random();
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Writes the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / (1u64 << BITS) as f64;
        for (o, (x, sh)) in out.iter_mut().zip(self.state.iter().zip(&self.shift)) {
            *o = f64::from(x ^ sh) * SCALE;
        }
        // Gray-code step: flip the direction number indexed by the lowest
        // zero bit of the current index.
        let c = (!self.index).trailing_zeros() as usize;
        if c < BITS {
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.index += 1;
    }

    /// The next `n` points as a point set on the unit cube.
    pub fn take_points(&mut self, n: usize) -> Points {
        let d = self.dim();
        let mut buf = vec![0.0; n * d];
        for row in buf.chunks_exact_mut(d) {
            self.next_into(row);
        }
        Points::from_flat(d, buf).expect("dimension is nonzero")
    }
}

fn direction_numbers(s: usize, a: u32, m: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for k in 0..BITS {
        if k < s {
            v[k] = m[k] << (BITS - 1 - k);
        } else {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= v[k - j];
                }
            }
            v[k] = x;
        }
    }
    v
}

/// First `n` points of a (possibly shifted) Sobol sequence mapped into `bounds`.
pub fn sobol_in_box(bounds: &Bounds, n: usize, scramble_seed: Option<u64>) -> Result<Points> {
    let d = bounds.dim();
    let mut gen = match scramble_seed {
        Some(seed) => Sobol::scrambled(d, seed)?,
        None => Sobol::new(d)?,
    };
    let unit = gen.take_points(n);
    let mut out = Points::with_capacity(d, n);
    let mut buf = vec![0.0; d];
    for u in unit.iter() {
        bounds.from_unit(u, &mut buf);
        out.push(&buf)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_table_is_well_formed() {
        for &(s, _, m) in DIRECTIONS {
            assert_eq!(m.len(), s as usize);
            for (k, &mk) in m.iter().enumerate() {
                assert_eq!(mk % 2, 1, "direction numbers must be odd");
                assert!(mk < (1 << (k + 1)), "m_k must be below 2^k");
            }
        }
    }

    #[test]
    fn first_points_match_reference() {
        // Unscrambled 2-D Sobol: (0,0), (.5,.5), (.75,.25), (.25,.75), (.375,.375)
        let mut s = Sobol::new(2).unwrap();
        let pts = s.take_points(5);
        let expect = [
            [0.0, 0.0],
            [0.5, 0.5],
            [0.75, 0.25],
            [0.25, 0.75],
            [0.375, 0.375],
        ];
        for (p, e) in pts.iter().zip(expect) {
            assert_eq!(p, &e);
        }
    }

    #[test]
    fn each_coordinate_is_stratified() {
        // The first 2^m points put exactly one point in each dyadic interval
        // of length 2^-m, in every coordinate.
        let mut s = Sobol::new(MAX_DIM).unwrap();
        let pts = s.take_points(64);
        for j in 0..MAX_DIM {
            let mut seen = [false; 64];
            for p in pts.iter() {
                let cell = (p[j] * 64.0) as usize;
                assert!(!seen[cell], "dimension {j} has two points in cell {cell}");
                seen[cell] = true;
            }
        }
    }

    #[test]
    fn shifted_sequence_is_still_stratified() {
        let mut s = Sobol::scrambled(5, 99).unwrap();
        let pts = s.take_points(32);
        for j in 0..5 {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[j] * 32.0) as usize).collect();
            cells.sort_unstable();
            cells.dedup();
            assert_eq!(cells.len(), 32);
        }
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_DIM + 1).is_err());
    }
}
