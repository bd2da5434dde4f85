//! Thread pool versus a single worker on the sampled workloads.
//!
//! With the `parallel` feature the library fans out over whatever rayon pool
//! is current, so running the same call inside a one-thread pool gives the
//! sequential baseline without a rebuild. Built with `--no-default-features`
//! both variants run the sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lindcycle::cycle::{contraction_check, lambda_profile};
use lindcycle::models::builtin;
use lindcycle::propagation::monodromy_with;
use lindcycle::PropagationOptions;
use rayon::ThreadPoolBuilder;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let threads = rayon::current_num_threads();
    let mut out = vec![("sequential".to_string(), ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if lindcycle::is_parallel() && threads > 1 {
        out.push((format!("parallel_{threads}"), ThreadPoolBuilder::new().num_threads(threads).build().unwrap()));
    }
    out
}

fn bench_monodromy(c: &mut Criterion) {
    let p = builtin("driven_qubit").unwrap().protocol;
    let opts = PropagationOptions::with_slices(8192);
    let mut group = c.benchmark_group("monodromy_8192_slices");
    group.sample_size(20);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| monodromy_with(&p, &opts).unwrap()))
        });
    }
    group.finish();
}

fn bench_contraction(c: &mut Criterion) {
    let p = builtin("repaired").unwrap().protocol;
    let opts = PropagationOptions::default();
    let mut group = c.benchmark_group("contraction_check_2000_samples");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| contraction_check(&p, 1.0, 2000, 65, &opts, 1).unwrap()))
        });
    }
    group.finish();
}

fn bench_rates(c: &mut Criterion) {
    let p = builtin("quasiperiodic_divergent").unwrap().protocol;
    let mut group = c.benchmark_group("lambda_profile_20001_points");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| lambda_profile(&p, 60.0, 20_001).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_monodromy, bench_contraction, bench_rates);
criterion_main!(benches);
