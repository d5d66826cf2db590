use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfc_core::harness::{delay_grid, delay_sweep, window_sweep};
use mfc_core::margins::{margins_numeric_batch, FrequencyRange};
use mfc_core::{ControllerKind, Execution, Gains, OpenLoopTf, Scenario};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn margin_batch(c: &mut Criterion) {
    let tfs: Vec<OpenLoopTf> = (0..256)
        .map(|i| {
            let x = 0.05 + i as f64 * 0.04;
            OpenLoopTf::new(ControllerKind::IPID, Gains::ipid(x, 1.0 + x, 2.0))
        })
        .collect();
    let range = FrequencyRange::default();
    let mut group = c.benchmark_group("numeric_margins_256");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| margins_numeric_batch(black_box(&tfs), &range, 1e-12, exec))
        });
    }
    group.finish();
}

fn delay_sweep_bench(c: &mut Criterion) {
    let mut base = Scenario::preset("delay-sweep").unwrap();
    base.duration = 60.0;
    let taus = delay_grid(1.0, 2.0, 0.05, base.sample_period).unwrap();
    let mut group = c.benchmark_group("delay_sweep_21x60s");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| delay_sweep(1.0, black_box(&taus), &base, exec).unwrap())
        });
    }
    group.finish();
}

fn window_sweep_bench(c: &mut Criterion) {
    let base = Scenario::preset("fig1").unwrap();
    let windows = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let mut group = c.benchmark_group("window_sweep_fig1");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| window_sweep(&base, black_box(&windows), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, margin_batch, delay_sweep_bench, window_sweep_bench);
criterion_main!(benches);
