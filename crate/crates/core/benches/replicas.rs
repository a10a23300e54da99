use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use effc_core::dynamics::{descent_replicas, simulate_path_into, OccupationHistogram};
use effc_core::excursions::sample_excursion;
use effc_core::par::{map_replicas_with, Execution};
use effc_core::rng::replica_rng;
use effc_core::ModelParams;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn descents(c: &mut Criterion) {
    let params = ModelParams::new(1.0, 0.2).unwrap();
    let mut group = c.benchmark_group("descent_1e4_to_10");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 64), |b| {
            b.iter(|| descent_replicas(&params, 10_000, 10, 10_000, None, 64, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn excursions(c: &mut Criterion) {
    let params = ModelParams::new(1.0, 0.25).unwrap();
    let mut group = c.benchmark_group("excursions_n_max_1e4");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 256), |b| {
            b.iter(|| {
                map_replicas_with(exec, 256, |i| {
                    sample_excursion(&params, 10_000, &[1000, 100], 10, &mut replica_rng(2, i as u64)).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn occupation(c: &mut Criterion) {
    let params = ModelParams::new(1.0, 0.2).unwrap();
    let mut group = c.benchmark_group("occupation_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 8), |b| {
            b.iter(|| {
                map_replicas_with(exec, 8, |i| {
                    let mut hist = OccupationHistogram::new(1000);
                    simulate_path_into(&params, 1000, 50.0, 1000, None, &mut replica_rng(3, i as u64), &mut hist)
                        .unwrap();
                    hist.total()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, descents, excursions, occupation);
criterion_main!(benches);
