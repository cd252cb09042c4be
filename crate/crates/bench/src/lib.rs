//! Shared fixtures for the criterion benchmarks under `benches/`.

use gridbo::{Bounds, GpPosterior, KernelSpec, MaternNu, Points};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matérn-5/2 posterior on `n` uniform points of `[0,1]^dim`, conditioned on
/// a smooth test signal.
pub fn posterior_fixture(dim: usize, n: usize, seed: u64) -> (GpPosterior, Bounds) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = Bounds::unit(dim);
    let x = Points::from_flat(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect())
        .expect("well-formed points");
    let y: Vec<f64> = x
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, v)| ((i + 2) as f64 * v).sin()).sum())
        .collect();
    let kernel = KernelSpec::matern(MaternNu::FiveHalves, 0.3).expect("kernel");
    let gp = GpPosterior::new(kernel, 1e-4, x, &y).expect("posterior");
    (gp, domain)
}
