use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3};
use proptest::prelude::*;

use qmra_core::graph::{
    build_relative_measurements, corrupt_with_noise, generate_ground_truth, residual_avg, sparsify,
    synthetic_graph, NoiseSpec, SyntheticSpec, Topology,
};
use qmra_core::qubo::{binarize, build_cost_matrix, decode_bits, linearize, random_qubo};
use qmra_core::solvers::{BoltzmannSampler, SaConfig};
use qmra_core::{Backend, BinaryQubo, Sampler, TangentVector};

fn ring(n: usize) -> Topology {
    Topology::Edges(
        (0..n)
            .flat_map(|i| [(i, (i + 1) % n), ((i + 1) % n, i)])
            .collect(),
    )
}

fn tangent() -> impl Strategy<Value = TangentVector> {
    (-1.8f64..1.8, -1.8f64..1.8, -1.8f64..1.8).prop_map(|(x, y, z)| TangentVector::new(x, y, z))
}

#[test]
fn noise_free_ground_truth_has_zero_residual_for_every_topology() {
    for n in [2, 3, 7, 12] {
        let gt = generate_ground_truth(n, n as u64).unwrap();
        for topo in [Topology::Complete, ring(n.max(3))] {
            if matches!(topo, Topology::Edges(_)) && n < 3 {
                continue;
            }
            let g = build_relative_measurements(&gt, &topo).unwrap();
            let g = corrupt_with_noise(
                &g,
                &NoiseSpec {
                    sigma: 0.0,
                    seed: 1,
                },
            );
            assert!(residual_avg(&g, &gt) <= 1e-12);
        }
    }
}

#[test]
fn residual_grows_with_noise_on_average() {
    let means: Vec<f64> = [0.0, PI / 10.0, PI / 5.0, PI / 3.0, PI / 2.0]
        .iter()
        .map(|&sigma| {
            (0..20)
                .map(|seed| {
                    let g = synthetic_graph(&SyntheticSpec {
                        n: 8,
                        sigma,
                        keep_ratio: 1.0,
                        seed,
                    })
                    .unwrap();
                    residual_avg(&g, g.ground_truth().unwrap())
                })
                .sum::<f64>()
                / 20.0
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}

#[test]
fn decomposition_bound_holds_for_decoded_steps() {
    for m in 1..=5 {
        let delta = 0.37;
        for x in 0..(1usize << (3 * m)).min(4096) {
            let bits: Vec<u8> = (0..3 * m).map(|i| ((x >> i) & 1) as u8).collect();
            let dv = decode_bits(&bits, m, delta).unwrap();
            assert!(dv.amax() <= delta * (1.0 + 1e-15));
        }
    }
}

fn all_energies_validated(qubo: &BinaryQubo, backend: &Backend, seed: u64) -> f64 {
    let set = backend.sample(qubo, seed).unwrap();
    let samples = set.samples();
    assert!(!samples.is_empty());
    for s in samples {
        assert!((s.energy - qubo.energy(&s.bits)).abs() <= 1e-9);
    }
    assert!(samples.windows(2).all(|w| w[0].energy <= w[1].energy));
    samples[0].energy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sparsified_graphs_stay_connected_and_transpose_consistent(
        n in 3usize..14,
        keep in 0.05f64..1.0,
        seed in 0u64..1000,
    ) {
        let gt = generate_ground_truth(n, seed).unwrap();
        let full = corrupt_with_noise(
            &build_relative_measurements(&gt, &Topology::Complete).unwrap(),
            &NoiseSpec { sigma: 0.4, seed },
        );
        let pairs = n * (n - 1) / 2;
        let kept = (pairs as f64 * keep).round() as usize;
        let g = match sparsify(&full, keep, seed) {
            Ok(g) => g,
            Err(qmra_core::Error::Connectivity(_)) => {
                prop_assert!(kept + 1 < n);
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(g.is_connected());
        prop_assert_eq!(g.undirected_edge_count(), kept);
        for e in g.edges() {
            let back = g.measurement(e.j, e.i).expect("both directions kept");
            prop_assert!((back.0 - e.rel.0.transpose()).norm() <= 1e-12);
        }
        let adj = g.adjacency();
        prop_assert!(adj.iter().all(|a| !a.is_empty()));
    }

    #[test]
    fn quadratic_form_matches_direct_edge_sum_off_manifold(
        n in 2usize..8,
        keep in 0.3f64..1.0,
        seed in 0u64..500,
        values in proptest::collection::vec(-2.0f64..2.0, 72),
    ) {
        let g = synthetic_graph(&SyntheticSpec { n, sigma: 0.3, keep_ratio: keep, seed });
        prop_assume!(g.is_ok());
        let g = g.unwrap();
        let cost = build_cost_matrix(&g);
        let x = DVector::from_iterator(9 * n, values.iter().cycle().copied().take(9 * n));
        let block = |i: usize| Matrix3::from_column_slice(x.rows(9 * i, 9).as_slice());
        let mut direct = 0.0;
        let mut norms = 0.0;
        for e in g.edges() {
            direct += (e.rel.0 * block(e.i) - block(e.j)).norm_squared();
            norms += block(e.i).norm_squared() + block(e.j).norm_squared();
        }
        // diagonal blocks are -2 I, the self-loop term R_ii = I
        let diagonal: f64 = (0..n).map(|i| -2.0 * block(i).norm_squared()).sum();
        let quad = x.dot(&(cost.matrix() * &x));
        prop_assert!((direct - (quad - diagonal + norms)).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn binary_energy_equals_subproblem_objective(
        tangents in proptest::collection::vec(tangent(), 3),
        delta in 0.001f64..0.6,
        alpha in 0.0f64..2.0,
        m in 1usize..4,
        seed in 0u64..100,
        bits_seed in any::<u64>(),
    ) {
        let g = synthetic_graph(&SyntheticSpec { n: 3, sigma: 0.5, keep_ratio: 1.0, seed }).unwrap();
        let sub = linearize(&build_cost_matrix(&g), &tangents, alpha, delta).unwrap();
        let b = binarize(&sub, m).unwrap();
        let bits: Vec<u8> = (0..b.dim()).map(|i| ((bits_seed >> (i % 64)) & 1) as u8).collect();
        let dv = decode_bits(&bits, m, delta).unwrap();
        let quad = dv.dot(&(&sub.q_hat * &dv));
        let lin = sub.c_hat.dot(&dv);
        let lhs = b.energy(&bits) + b.offset;
        prop_assert!((lhs - quad - lin).abs() <= 1e-9 * (quad.abs() + lin.abs()).max(1e-300));
    }

    #[test]
    fn no_backend_undercuts_exhaustive(seed in 0u64..10_000, dim in 2usize..13) {
        let q = random_qubo(dim, seed);
        let ground = all_energies_validated(&q, &Backend::Exhaustive, 0);
        let sa = Backend::Sa(SaConfig { reads: 10, sweeps: 30, ..SaConfig::default() });
        let gibbs = Backend::Boltzmann(BoltzmannSampler { beta: 0.7, reads: 30 });
        for backend in [&sa, &gibbs] {
            let best = all_energies_validated(&q, backend, seed);
            prop_assert!(best >= ground - 1e-9);
        }
    }

    #[test]
    fn exhaustive_beats_annealing_on_two_node_subproblems(
        tangents in proptest::collection::vec(tangent(), 2),
        m in 1usize..=3,
        seed in 0u64..200,
    ) {
        let g = synthetic_graph(&SyntheticSpec { n: 2, sigma: 0.6, keep_ratio: 1.0, seed }).unwrap();
        let sub = linearize(&build_cost_matrix(&g), &tangents, 0.5, PI / 30.0).unwrap();
        let b = binarize(&sub, m).unwrap();
        let exact = all_energies_validated(&b, &Backend::Exhaustive, 0);
        let sa = Backend::Sa(SaConfig { reads: 20, sweeps: 50, ..SaConfig::default() });
        prop_assert!(exact <= all_energies_validated(&b, &sa, seed) + 1e-12);
    }
}
