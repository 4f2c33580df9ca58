use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sta_link::protocol::{run, ProtocolConfig};
use sta_link::sweep::{run_sweep, Axis, Execution, SweepGrid};

fn small_grid() -> SweepGrid {
    SweepGrid { v: Axis::linear(1.5, 3.5, 4), g3: Axis::linear(0.4, 1.0, 4), template: ProtocolConfig::default().dissipative() }
}

fn single_run(c: &mut Criterion) {
    let cfg = ProtocolConfig::default();
    c.bench_function("double-sta lossless", |b| b.iter(|| run(black_box(&cfg)).unwrap().f_e));
}

fn sweep_execution(c: &mut Criterion) {
    let grid = small_grid();
    let mut group = c.benchmark_group("sweep 4x4");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_sweep(black_box(&grid), Execution::Sequential).unwrap()));
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = vec![2, 4, cores];
    counts.sort_unstable();
    counts.dedup();
    for jobs in counts.into_iter().filter(|&j| j > 1) {
        group.bench_with_input(BenchmarkId::new("parallel", jobs), &jobs, |b, &jobs| {
            b.iter(|| run_sweep(black_box(&grid), Execution::Parallel { jobs }).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, single_run, sweep_execution);
criterion_main!(benches);
