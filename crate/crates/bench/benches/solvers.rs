use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmra_core::qubo::random_qubo;
use qmra_core::solvers::{BoltzmannSampler, ExhaustiveSolver, SaConfig, SimulatedAnnealer};
use qmra_core::Sampler;

fn annealing(c: &mut Criterion) {
    let mut group = c.benchmark_group("sa");
    group.sample_size(10);
    for dim in [16, 90, 180] {
        let qubo = random_qubo(dim, 1);
        let sa = SimulatedAnnealer::new(SaConfig {
            reads: 20,
            sweeps: 100,
            ..SaConfig::default()
        })
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &qubo, |b, q| {
            b.iter(|| sa.sample(black_box(q), 7).unwrap())
        });
    }
    group.finish();
}

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate");
    group.sample_size(10);
    for dim in [12, 16, 20] {
        let qubo = random_qubo(dim, 2);
        group.bench_with_input(BenchmarkId::new("exhaustive", dim), &qubo, |b, q| {
            b.iter(|| ExhaustiveSolver.sample(black_box(q), 0).unwrap())
        });
    }
    let gibbs = BoltzmannSampler {
        beta: 1.0,
        reads: 100,
    };
    let qubo = random_qubo(12, 3);
    group.bench_function("boltzmann/12", |b| {
        b.iter(|| gibbs.sample(black_box(&qubo), 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, annealing, enumeration);
criterion_main!(benches);
