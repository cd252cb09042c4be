use rand::Rng;

use crate::error::{Error, Result};
use crate::points::{Bounds, Points};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact Euclidean nearest-neighbour queries over a fixed point set (k-d tree).
#[derive(Debug, Clone)]
pub struct NearestNeighbors {
    dim: usize,
    /// Points reordered so every leaf is a contiguous block.
    coords: Vec<f64>,
    /// Original index of each reordered point.
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl NearestNeighbors {
    pub fn new(points: &Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("nearest-neighbour set must be nonempty"));
        }
        let dim = points.dim();
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        build(points, &mut ids, 0, &mut nodes);
        let mut coords = Vec::with_capacity(points.as_flat().len());
        for &i in &ids {
            coords.extend_from_slice(points.row(i));
        }
        Ok(Self {
            dim,
            coords,
            ids,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Index (into the original set) and distance of the nearest point.
    /// Ties go to the lowest original index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        assert_eq!(x.len(), self.dim, "query dimension mismatch");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, x, &mut best);
        (best.0, best.1.sqrt())
    }

    fn search(&self, node: usize, x: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let p = &self.coords[k * self.dim..(k + 1) * self.dim];
                    let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    let id = self.ids[k];
                    if d2 < best.1 || (d2 == best.1 && id < best.0) {
                        *best = (id, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = x[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, best);
                if diff * diff <= best.1 {
                    self.search(far, x, best);
                }
            }
        }
    }
}

fn build(points: &Points, ids: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let dim = points.dim();
    let mut axis = 0;
    let mut widest = -1.0;
    for j in 0..dim {
        let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = points.row(i)[j];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > widest {
            widest = hi - lo;
            axis = j;
        }
    }
    if widest <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| points.row(a)[axis].total_cmp(&points.row(b)[axis]));
    let value = points.row(ids[mid])[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = ids.split_at_mut(mid);
    let left = build(points, lo, offset, nodes);
    let right = build(points, hi, offset + mid, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}

/// Monte Carlo fill distance: the largest nearest-grid-point distance over
/// `probe_size` uniform probes of `domain`. A lower bound on the supremum.
pub fn fill_distance<R: Rng + ?Sized>(
    grid: &Points,
    domain: &Bounds,
    probe_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if grid.dim() != domain.dim() {
        return Err(Error::input("grid and domain dimensions differ"));
    }
    let nn = NearestNeighbors::new(grid)?;
    let mut probe = vec![0.0; domain.dim()];
    let mut h: f64 = 0.0;
    for _ in 0..probe_size.max(1) {
        for (j, p) in probe.iter_mut().enumerate() {
            let (l, u) = (domain.lower()[j], domain.upper()[j]);
            *p = l + rng.random::<f64>() * (u - l);
        }
        h = h.max(nn.nearest(&probe).1);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &Points, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn single_midpoint_tends_to_half() {
        let grid = Points::from_rows(&[[0.5]]).unwrap();
        let h = fill_distance(&grid, &Bounds::unit(1), 20_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(h <= 0.5 && h > 0.499, "{h}");
    }

    #[test]
    fn grid_equal_to_probes_gives_zero() {
        let domain = Bounds::unit(3);
        let grid = domain.sample_points(500, &mut ChaCha8Rng::seed_from_u64(2));
        let h = fill_distance(&grid, &domain, 500, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(fill_distance(&Points::new(2), &Bounds::unit(2), 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let grid = Points::from_rows(&vec![[0.2, 0.2]; 20]).unwrap();
        let nn = NearestNeighbors::new(&grid).unwrap();
        assert_eq!(nn.nearest(&[0.9, 0.9]).0, 0);
    }

    proptest! {
        #[test]
        fn tree_matches_brute_force(seed in 0u64..10_000, n in 1usize..200, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let domain = Bounds::unit(d);
            let grid = domain.sample_points(n, &mut rng);
            let nn = NearestNeighbors::new(&grid).unwrap();
            for q in domain.sample_points(20, &mut rng).iter() {
                let (i, dist) = nn.nearest(q);
                let (j, bd) = brute(&grid, q);
                prop_assert_eq!(dist, bd);
                prop_assert_eq!(i, j);
            }
        }
    }
}
