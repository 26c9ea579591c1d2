use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softrgg::{
    is_connected, run_trials, sample_edges, sample_ppp, truncate_edges, ConnectionFunction,
    ExperimentSpec, Family, SamplingMode, ScalingRegime, Torus,
};

fn edges(c: &mut Criterion) {
    let cf = ConnectionFunction::rayleigh();
    let mut group = c.benchmark_group("sample_edges");
    for length in [1e3, 1e4] {
        let regime = ScalingRegime::new(1.0, length, &cf, 1.0).unwrap();
        let torus = Torus::new(length).unwrap();
        let config = sample_ppp(&torus, &mut ChaCha8Rng::seed_from_u64(1));
        let modes = [
            ("windowed", SamplingMode::default()),
            ("exact", SamplingMode::Exact),
        ];
        for (name, mode) in modes {
            if name == "exact" && length > 1e3 {
                continue;
            }
            group.bench_with_input(BenchmarkId::new(name, length), &config, |b, config| {
                let mut rng = ChaCha8Rng::seed_from_u64(2);
                b.iter(|| sample_edges(config.clone(), &cf, &regime, &mut rng, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn graph_queries(c: &mut Criterion) {
    let cf = ConnectionFunction::rayleigh();
    let regime = ScalingRegime::new(1.0, 1e4, &cf, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = sample_ppp(&Torus::new(1e4).unwrap(), &mut rng);
    let g = sample_edges(config, &cf, &regime, &mut rng, SamplingMode::default()).unwrap();
    c.bench_function("is_connected/1e4", |b| {
        b.iter(|| is_connected(black_box(&g)))
    });
    c.bench_function("truncate_edges/1e4", |b| {
        b.iter(|| truncate_edges(black_box(&g), regime.cutoff))
    });
}

fn trials(c: &mut Criterion) {
    let mut spec = ExperimentSpec::new(1.0, 1000.0, Family::Rayleigh, 50, 4);
    spec.truncation = true;
    spec.m_values = vec![4];
    let mut group = c.benchmark_group("run_trials");
    group.sample_size(10);
    group.bench_function("L=1000 x50", |b| b.iter(|| run_trials(&spec, 1).unwrap()));
    group.finish();
}

criterion_group!(benches, edges, graph_queries, trials);
criterion_main!(benches);
