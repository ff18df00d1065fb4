//! Thread-pool fan-out against a one-thread pool on the chair workload.

use criterion::measurement::WallTime;
use criterion::{criterion_group, criterion_main, BenchmarkGroup, Criterion};
use reparam_core::bundled;
use reparam_core::constraints::{enumerate_candidates, DEFAULT_EPS_REL};
use reparam_core::discovery::{greedy_rank, reference_renders, DiscoveryConfig, Projector};
use reparam_core::raster::DEFAULT_SIZE;
use reparam_core::synth::synth_variations;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    vec![("default", default), ("single", single)]
}

fn run<F: Fn() + Sync>(group: &mut BenchmarkGroup<'_, WallTime>, f: F) {
    for (name, pool) in pools() {
        group.bench_function(name, |b| b.iter(|| pool.install(&f)));
    }
}

fn chair(c: &mut Criterion) {
    let model = bundled::chair();
    let x0 = model.flatten();
    let pool = enumerate_candidates(&model, &x0, DEFAULT_EPS_REL).unwrap();
    let spec = bundled::chair_spec(&pool).unwrap();
    let vars = synth_variations(&model, &pool, &spec).unwrap().set;
    let config = DiscoveryConfig::default();
    let projector = Projector::from_config(&model, &x0, &config).unwrap();
    let cameras = config.cameras_for(&model, &x0).unwrap();

    let mut group = c.benchmark_group("reference_renders");
    group.sample_size(10);
    run(&mut group, || {
        reference_renders(&model, &vars, &cameras, DEFAULT_SIZE).unwrap();
    });
    group.finish();

    let mut group = c.benchmark_group("greedy_rank");
    group.sample_size(10);
    run(&mut group, || {
        greedy_rank(&model, &pool, &vars, &projector, &config).unwrap();
    });
    group.finish();
}

criterion_group!(benches, chair);
criterion_main!(benches);
