use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use eigenspot::linalg::{rank1_svd, CountMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use eigenspot::simulator::SimRng;
use eigenspot::{detect_baseline_method, detect_eigenspot, Tail};

fn random_pair(n: usize, seed: u64) -> (CountMatrix, CountMatrix) {
    let mut rng = SimRng::new(seed);
    let baseline = CountMatrix::from_fn(n, n, |_, _| 1.0 + 1000.0 * rng.uniform()).unwrap();
    let cases = CountMatrix::from_fn(n, n, |r, t| {
        let hot = r < n / 10 && t < n / 10;
        (if hot { 3.0 } else { 1.0 }) * (1.0 + 50.0 * rng.uniform())
    })
    .unwrap();
    (baseline, cases)
}

fn bench_rank1_svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank1_svd");
    for n in [64, 128, 256, 512] {
        let (m, _) = random_pair(n, 1);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| rank1_svd(black_box(m), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
        });
    }
    group.finish();
}

fn bench_detectors(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect");
    for n in [32, 128, 512] {
        let (b, cs) = random_pair(n, 2);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::new("eigenspot", n), &(&b, &cs), |bench, (b, cs)| {
            bench.iter(|| detect_eigenspot(black_box(b), black_box(cs), 0.05, Tail::TwoTailed).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ratio", n), &(&b, &cs), |bench, (b, cs)| {
            bench.iter(|| {
                detect_baseline_method(black_box(b), black_box(cs), 0.05, Tail::TwoTailed).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rank1_svd, bench_detectors);
criterion_main!(benches);
