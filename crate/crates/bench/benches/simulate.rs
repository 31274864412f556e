use criterion::{criterion_group, criterion_main, Criterion};
use hierbvn::sim::run;
use hierbvn::{Mode, SimConfig, TrafficModel};

fn config(model: TrafficModel, balancing: bool, mode: Mode) -> SimConfig {
    SimConfig {
        horizon: 10_000,
        warmup: 1_000,
        balancing,
        mode,
        ..SimConfig::new(model, 0.03)
    }
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_1e4_slots");
    group.sample_size(10);
    for (name, cfg) in [
        ("U/on", config(TrafficModel::Uniform, true, Mode::Fast)),
        ("NU/off", config(TrafficModel::Hotspot, false, Mode::Fast)),
        ("NU/on", config(TrafficModel::Hotspot, true, Mode::Fast)),
        ("NU/on/verify", config(TrafficModel::Hotspot, true, Mode::Verify)),
    ] {
        group.bench_function(name, |b| b.iter(|| run(cfg.clone()).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
