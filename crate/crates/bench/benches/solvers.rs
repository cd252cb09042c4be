use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gridbo::acquisition::{ts_build, Ucb};
use gridbo::solvers::{solve, SolverKind, SolverSpec};
use gridbo_bench::posterior_fixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ucb_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("ucb_solve");
    group.sample_size(10);
    for dim in [2, 6] {
        let (gp, domain) = posterior_fixture(dim, 40, 1);
        let acq = Ucb::new(&gp, 2.0, 1.0).unwrap();
        let t = 50;
        let specs = [
            SolverSpec::uniform_grid(100),
            SolverSpec::defaults(SolverKind::MultiStartSimplex, dim),
            SolverSpec::defaults(SolverKind::MultiStartGradient, dim),
        ];
        for spec in specs {
            group.bench_function(BenchmarkId::new(spec.label(), dim), |b| {
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                b.iter(|| solve(&spec, &acq, &domain, t, &mut rng).unwrap())
            });
        }
    }
    group.finish();
}

fn thompson_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("ts_build");
    group.sample_size(10);
    let (gp, domain) = posterior_fixture(3, 40, 2);
    for size in [500, 2000] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = domain.sample_points(size, &mut rng);
        group.bench_function(BenchmarkId::from_parameter(size), |b| {
            b.iter(|| ts_build(&gp, grid.clone(), 2.0, 0.0, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn posterior_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("gp_update");
    for n in [50, 200] {
        let (gp, _) = posterior_fixture(4, n, 4);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter_batched(
                || gp.clone(),
                |mut g| g.update_in_place(&[0.5, 0.25, 0.75, 0.1], 0.3).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, ucb_solvers, thompson_grid, posterior_update);
criterion_main!(benches);
