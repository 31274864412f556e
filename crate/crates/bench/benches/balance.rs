use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hierbvn::balancing::{balance_all_blocks, balance_block, balance_block_fast};
use hierbvn_bench::{random_backlog, skewed_block};
use std::hint::black_box;

fn bench_block(c: &mut Criterion) {
    let mut group = c.benchmark_group("balance_block");
    for m in [2, 4, 8] {
        let x = skewed_block(m, 50);
        group.bench_with_input(BenchmarkId::new("unit", m), &x, |b, x| b.iter(|| balance_block(black_box(x))));
        group.bench_with_input(BenchmarkId::new("batched", m), &x, |b, x| {
            b.iter(|| balance_block_fast(black_box(x)))
        });
    }
    group.finish();
}

fn bench_backlog(c: &mut Criterion) {
    let x = random_backlog(2, 8, 20, 3);
    c.bench_function("balance_all_blocks/2x8", |b| b.iter(|| balance_all_blocks(black_box(&x), true)));
}

criterion_group!(benches, bench_block, bench_backlog);
criterion_main!(benches);
