use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rcn_sq_core::classify::{build_ground_truth, mc_error};
use rcn_sq_core::hidden::{random_direction, HiddenInstance, LabeledSource};
use rcn_sq_core::univariate::CombSpec;
use rcn_sq_core::Execution;

fn instance() -> HiddenInstance {
    let spec = CombSpec::new(0.25, 1e-3, 4, 3).unwrap();
    HiddenInstance::eq1(random_direction(16, 0), spec).unwrap()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn sampling(c: &mut Criterion) {
    let inst = instance();
    let mut group = c.benchmark_group("sample_n");
    group.sample_size(20);
    for n in [10_000usize, 100_000] {
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| b.iter(|| inst.sample_n(n, 1, exec)));
        }
    }
    group.finish();
}

fn monte_carlo_error(c: &mut Criterion) {
    let inst = instance();
    let gt = build_ground_truth(&inst);
    let mut group = c.benchmark_group("mc_error");
    group.sample_size(20);
    for (name, exec) in modes() {
        group.bench_function(name, |b| b.iter(|| mc_error(&inst, &gt, 100_000, 2, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sampling, monte_carlo_error);
criterion_main!(benches);
