//! Sequential vs data-parallel timings of the hot paths.
//!
//! "sequential" runs inside a one-thread rayon pool, which executes the same
//! code path as a build with `--no-default-features`; "parallel" uses the
//! global pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use distreg::synth::{variance_task, TaskParams};
use distreg::{bag_gram, bag_mean_feature_rows, cross_bag_gram, sample_basis, RbfParams};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn bench_gram(c: &mut Criterion) {
    let data = variance_task(&TaskParams { bags: 60, ..TaskParams::default() }, 1).unwrap();
    let params = RbfParams::new(1.0).unwrap();
    let mut group = c.benchmark_group("bag_gram");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new(name, data.len()), &data, |b, d| {
            b.iter(|| pool.install(|| bag_gram(d.bags(), &params).unwrap()))
        });
    }
    group.finish();

    let (test, train) = data.bags().split_at(20);
    let mut group = c.benchmark_group("cross_bag_gram");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, "20x40"), |b| {
            b.iter(|| pool.install(|| cross_bag_gram(test, train, &params).unwrap()))
        });
    }
    group.finish();
}

fn bench_rff(c: &mut Criterion) {
    let data = variance_task(&TaskParams::default(), 2).unwrap();
    let mut group = c.benchmark_group("rff_mean_features");
    group.sample_size(10);
    for features in [128usize, 1024] {
        let basis = sample_basis(3, features, 1.0, 3).unwrap();
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, features), &basis, |b, basis| {
                b.iter(|| pool.install(|| bag_mean_feature_rows(data.bags(), basis).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_gram, bench_rff);
criterion_main!(benches);
