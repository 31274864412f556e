use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hierbvn::{decompose, hier_decompose};
use hierbvn_bench::random_backlog;
use std::hint::black_box;

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for (m, n) in [(2, 8), (4, 8), (8, 4)] {
        let x = random_backlog(m, n, 6, 1);
        let label = format!("{m}x{n}");
        group.bench_with_input(BenchmarkId::new("hierarchical", &label), &x, |b, x| {
            b.iter(|| hier_decompose(black_box(x)))
        });
        let scale = x.data().scale().unwrap();
        group.bench_with_input(BenchmarkId::new("flat", &label), &x, |b, x| {
            b.iter(|| decompose(black_box(x.data()), scale).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_decompose);
criterion_main!(benches);
