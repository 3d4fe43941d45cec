use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmra_core::graph::{synthetic_graph, SyntheticSpec};
use qmra_core::qubo::{binarize, build_cost_matrix, build_direct_qubo, linearize};
use qmra_core::TangentVector;

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("subproblem");
    for n in [10, 20, 40] {
        let graph = synthetic_graph(&SyntheticSpec {
            n,
            sigma: 0.3,
            keep_ratio: 1.0,
            seed: 5,
        })
        .unwrap();
        let cost = build_cost_matrix(&graph);
        let tangents: Vec<_> = (0..n)
            .map(|i| TangentVector::new(0.1 * i as f64, -0.05, 0.2))
            .collect();
        group.bench_with_input(BenchmarkId::new("cost_matrix", n), &graph, |b, g| {
            b.iter(|| build_cost_matrix(black_box(g)))
        });
        group.bench_with_input(BenchmarkId::new("linearize", n), &tangents, |b, t| {
            b.iter(|| linearize(&cost, black_box(t), 0.5, 0.1).unwrap())
        });
        let sub = linearize(&cost, &tangents, 0.5, 0.1).unwrap();
        group.bench_with_input(BenchmarkId::new("binarize_m3", n), &sub, |b, s| {
            b.iter(|| binarize(black_box(s), 3).unwrap())
        });
    }
    let small = synthetic_graph(&SyntheticSpec {
        n: 10,
        sigma: 0.0,
        keep_ratio: 1.0,
        seed: 5,
    })
    .unwrap();
    group.bench_function("direct_qubo/10", |b| {
        b.iter(|| build_direct_qubo(black_box(&small)))
    });
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
