use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cubefrag::par::{map_range, Execution};
use cubefrag::sampler::{component_census, SampleSpec};
use cubefrag::stats::{run_experiment, ExperimentConfig};

const TRIALS: usize = 32;

fn census_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("census_batch_d14");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                map_range(TRIALS, exec, |i| {
                    let spec = SampleSpec::with_probability(14, 0.25, 7, i as u64).unwrap();
                    component_census(&spec, 64).unwrap().x
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment_d12");
    group.sample_size(10);
    let cfg = ExperimentConfig::new(12, "0.25", TRIALS as u64, 7);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_experiment(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, census_batch, experiment);
criterion_main!(benches);
