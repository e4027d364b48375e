use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dyadic_amr::adaptation::{mesh_update, Thresholds};
use dyadic_amr::euler::{self, density_gradient_monitor, explosion_initial};
use dyadic_amr::{Field, Grid, MeshMatrix, Neighborhood, RefinementBounds};

/// Explosion data on a grid adapted to it, levels 5 to 9.
fn adapted() -> (MeshMatrix, Field) {
    let m = MeshMatrix::build(RefinementBounds::new(2, 5, 9, 1).unwrap()).unwrap();
    let th = Thresholds::new(0.4, 0.4).unwrap();
    let mut grid = Grid::uniform(&m, 5).unwrap();
    for _ in 0..4 {
        let f = explosion_initial(&m, grid.clone()).unwrap();
        let nb = Neighborhood::build(&m, f.grid()).unwrap();
        grid = mesh_update(&m, &grid, &density_gradient_monitor(&m, &f, &nb), &th).unwrap().grid;
    }
    let f = explosion_initial(&m, grid).unwrap();
    (m, f)
}

/// Thread counts to compare: one worker against the default pool. Without
/// the `parallel` feature the library ignores the pool and runs sequentially.
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut counts = vec![1];
    if cfg!(feature = "parallel") && all > 1 {
        counts.push(all);
    }
    counts
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{n} threads"), pool)
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let (m, f) = adapted();
    let nb = Neighborhood::build(&m, f.grid()).unwrap();
    let gamma = 1.4;
    let dt = euler::stable_dt(&m, &f, gamma, 0.5).unwrap();
    let pools = pools();

    let mut g = c.benchmark_group(format!("adapted grid, {} cells", f.len()));
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::new("neighborhood", name), |b| {
            pool.install(|| b.iter(|| Neighborhood::build(&m, f.grid()).unwrap()))
        });
        g.bench_function(BenchmarkId::new("euler advance", name), |b| {
            pool.install(|| b.iter(|| euler::advance(&m, &f, &nb, gamma, dt).unwrap()))
        });
        g.bench_function(BenchmarkId::new("projection round trip", name), |b| {
            let fine = Grid::uniform(&m, 9).unwrap();
            pool.install(|| {
                b.iter(|| f.project_up(&m, &fine).unwrap().project_down(&m, f.grid()).unwrap())
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("matrix build");
    g.sample_size(10);
    let bounds = RefinementBounds::new(2, 0, 9, 1).unwrap();
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::new("levels 0 to 9", name), |b| {
            pool.install(|| b.iter(|| MeshMatrix::build(bounds).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
