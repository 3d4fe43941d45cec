//! Camera graphs of relative rotation measurements.
//!
//! A measurement on the ordered edge `(i, j)` is `R̃ᵢⱼ ≈ Rⱼ Rᵢᵀ`, so the
//! consistent solutions are invariant under `Rᵢ ↦ Rᵢ G` for any fixed `G`.

mod io;
mod synthetic;

use std::collections::{HashMap, VecDeque};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{geodesic_angle, project_to_so3, RotationMatrix, TangentVector};

pub use io::{load_graph, save_graph, GraphFile};
pub use synthetic::{
    build_relative_measurements, corrupt_with_noise, generate_ground_truth, sparsify,
    synthetic_graph, NoiseSpec, SyntheticSpec, Topology,
};

/// Tolerance for the `R̃ⱼᵢ = R̃ᵢⱼᵀ` consistency check.
pub const TRANSPOSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub rel: RotationMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraGraph {
    n: usize,
    edges: Vec<Edge>,
    ground_truth: Option<Vec<RotationMatrix>>,
}

impl CameraGraph {
    /// Validates node ids, duplicates, degrees and transpose consistency.
    pub fn new(
        n: usize,
        edges: Vec<Edge>,
        ground_truth: Option<Vec<RotationMatrix>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        let mut degree = vec![0usize; n];
        for (idx, e) in edges.iter().enumerate() {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} ({}, {}) references a node outside [0, {n})",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} is a self loop on {}",
                    e.i
                )));
            }
            if seen.insert((e.i, e.j), idx).is_some() {
                return Err(Error::InvalidGraph(format!(
                    "duplicate ordered edge ({}, {})",
                    e.i, e.j
                )));
            }
            if !e.rel.0.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} has non-finite entries"
                )));
            }
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        if n > 1 {
            if let Some(isolated) = degree.iter().position(|&d| d == 0) {
                return Err(Error::InvalidGraph(format!(
                    "node {isolated} has no measurements"
                )));
            }
        }
        for e in &edges {
            if let Some(&rev) = seen.get(&(e.j, e.i)) {
                let diff = (edges[rev].rel.0 - e.rel.0.transpose()).norm();
                if diff > TRANSPOSE_TOLERANCE {
                    return Err(Error::InvalidGraph(format!(
                        "edges ({}, {}) and ({}, {}) are not transposes (diff {diff:.3e})",
                        e.i, e.j, e.j, e.i
                    )));
                }
            }
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: gt.len(),
                    context: "ground truth rotations",
                });
            }
        }
        Ok(Self {
            n,
            edges,
            ground_truth,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn ground_truth(&self) -> Option<&[RotationMatrix]> {
        self.ground_truth.as_deref()
    }

    pub fn with_ground_truth(mut self, gt: Option<Vec<RotationMatrix>>) -> Result<Self> {
        if let Some(g) = &gt {
            if g.len() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    actual: g.len(),
                    context: "ground truth rotations",
                });
            }
        }
        self.ground_truth = gt;
        Ok(self)
    }

    /// Measurement on the ordered pair, if stored.
    pub fn measurement(&self, i: usize, j: usize) -> Option<&RotationMatrix> {
        self.edges
            .iter()
            .find(|e| e.i == i && e.j == j)
            .map(|e| &e.rel)
    }

    /// Undirected neighbour lists, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self.n, &self.adjacency())
    }

    /// Number of distinct unordered node pairs carrying a measurement.
    pub fn undirected_edge_count(&self) -> usize {
        self.adjacency().iter().map(Vec::len).sum::<usize>() / 2
    }
}

pub(crate) fn is_connected(n: usize, adj: &[Vec<usize>]) -> bool {
    if n == 0 {
        return true;
    }
    let mut visited = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    visited[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !visited[w] {
                visited[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == n
}

/// Mean over stored ordered measurements of `‖R̃ᵢⱼRᵢ − Rⱼ‖_F²`.
pub fn residual_avg(graph: &CameraGraph, rotations: &[RotationMatrix]) -> f64 {
    if graph.edges.is_empty() {
        return 0.0;
    }
    let total: f64 = graph
        .edges
        .iter()
        .map(|e| (e.rel.0 * rotations[e.i].0 - rotations[e.j].0).norm_squared())
        .sum();
    total / graph.edges.len() as f64
}

/// Mean over stored ordered measurements of `‖R̃ᵢⱼRᵢ − Rⱼ‖_F` (not squared).
pub fn residual_norm_avg(graph: &CameraGraph, rotations: &[RotationMatrix]) -> f64 {
    if graph.edges.is_empty() {
        return 0.0;
    }
    let total: f64 = graph
        .edges
        .iter()
        .map(|e| (e.rel.0 * rotations[e.i].0 - rotations[e.j].0).norm())
        .sum();
    total / graph.edges.len() as f64
}

/// Best global rotation `G` minimizing `Σ‖Rᵢ G − Rᵢ_GT‖_F²`.
pub fn gauge_alignment(est: &[RotationMatrix], gt: &[RotationMatrix]) -> Result<RotationMatrix> {
    let mut acc = Matrix3::zeros();
    for (e, g) in est.iter().zip(gt) {
        acc += e.0.transpose() * g.0;
    }
    project_to_so3(&acc)
}

/// Mean geodesic angle to ground truth after gauge alignment.
pub fn angle_error(est: &[RotationMatrix], gt: &[RotationMatrix]) -> Result<f64> {
    check_lengths(est, gt)?;
    let g = gauge_alignment(est, gt)?;
    let sum: f64 = est
        .iter()
        .zip(gt)
        .map(|(e, t)| geodesic_angle(&(*e * g), t))
        .sum();
    Ok(sum / est.len() as f64)
}

/// Mean chordal distance `‖Rᵢ G − Rᵢ_GT‖_F` to ground truth after gauge
/// alignment.
pub fn chordal_error(est: &[RotationMatrix], gt: &[RotationMatrix]) -> Result<f64> {
    check_lengths(est, gt)?;
    let g = gauge_alignment(est, gt)?;
    let sum: f64 = est
        .iter()
        .zip(gt)
        .map(|(e, t)| (e.0 * g.0 - t.0).norm())
        .sum();
    Ok(sum / est.len() as f64)
}

fn check_lengths(est: &[RotationMatrix], gt: &[RotationMatrix]) -> Result<()> {
    if est.len() != gt.len() || est.is_empty() {
        return Err(Error::Dimension {
            expected: gt.len(),
            actual: est.len(),
            context: "estimated vs ground-truth rotations",
        });
    }
    Ok(())
}

/// Initial rotations propagated along a breadth-first spanning tree rooted at
/// node 0 (which is pinned to the identity).
pub fn mst_initialization(graph: &CameraGraph) -> Result<Vec<TangentVector>> {
    let adj = graph.adjacency();
    let lookup: HashMap<(usize, usize), &RotationMatrix> =
        graph.edges.iter().map(|e| ((e.i, e.j), &e.rel)).collect();
    let mut rotations: Vec<Option<RotationMatrix>> = vec![None; graph.n];
    rotations[0] = Some(RotationMatrix::identity());
    let mut queue = VecDeque::from([0usize]);
    while let Some(parent) = queue.pop_front() {
        let rp = rotations[parent].expect("queued nodes are assigned");
        for &child in &adj[parent] {
            if rotations[child].is_some() {
                continue;
            }
            let rel = match lookup.get(&(parent, child)) {
                Some(r) => **r,
                None => lookup[&(child, parent)].transpose(),
            };
            rotations[child] = Some(rel * rp);
            queue.push_back(child);
        }
    }
    rotations
        .into_iter()
        .enumerate()
        .map(|(idx, r)| {
            r.map(|r| r.log())
                .ok_or_else(|| Error::Connectivity(format!("node {idx} unreachable from node 0")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_map;
    use std::f64::consts::PI;

    fn rotations_from(tangents: &[TangentVector]) -> Vec<RotationMatrix> {
        tangents.iter().map(exp_map).collect()
    }

    #[test]
    fn rejects_bad_edges() {
        let r = RotationMatrix::identity();
        let edge = |i, j| Edge { i, j, rel: r };
        assert!(CameraGraph::new(2, vec![edge(0, 2)], None).is_err());
        assert!(CameraGraph::new(2, vec![edge(0, 0)], None).is_err());
        assert!(CameraGraph::new(2, vec![edge(0, 1), edge(0, 1)], None).is_err());
        assert!(CameraGraph::new(3, vec![edge(0, 1)], None).is_err());
        let q = exp_map(&TangentVector::new(0.3, 0.0, 0.0));
        let bad = vec![Edge { i: 0, j: 1, rel: q }, Edge { i: 1, j: 0, rel: q }];
        assert!(CameraGraph::new(2, bad, None).is_err());
        assert!(CameraGraph::new(2, vec![edge(0, 1)], None).is_ok());
    }

    #[test]
    fn residual_of_half_turn_is_eight() {
        let flip = exp_map(&TangentVector::new(PI, 0.0, 0.0));
        let g = CameraGraph::new(
            2,
            vec![Edge {
                i: 0,
                j: 1,
                rel: flip,
            }],
            None,
        )
        .unwrap();
        let ident = vec![RotationMatrix::identity(); 2];
        assert!((residual_avg(&g, &ident) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn residual_ignores_edge_order() {
        let gt = generate_ground_truth(5, 3).unwrap();
        let g = build_relative_measurements(&gt, &Topology::Complete).unwrap();
        let g = corrupt_with_noise(
            &g,
            &NoiseSpec {
                sigma: 0.3,
                seed: 1,
            },
        );
        let mut edges = g.edges().to_vec();
        edges.reverse();
        let shuffled = CameraGraph::new(5, edges, None).unwrap();
        let a = residual_avg(&g, &gt);
        let b = residual_avg(&shuffled, &gt);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn angle_error_is_gauge_invariant() {
        let gt = generate_ground_truth(6, 11).unwrap();
        assert!(angle_error(&gt, &gt).unwrap() < 1e-7);
        let q = exp_map(&TangentVector::new(0.7, -1.2, 0.4));
        let moved: Vec<_> = gt.iter().map(|r| *r * q).collect();
        assert!(angle_error(&moved, &gt).unwrap() < 1e-7);
        assert!(chordal_error(&moved, &gt).unwrap() < 1e-9);
        let single = [exp_map(&TangentVector::new(0.1, 0.2, 0.3))];
        assert!(angle_error(&single, &[RotationMatrix::identity()]).unwrap() < 1e-7);
    }

    #[test]
    fn spanning_tree_init_on_chain_is_exact() {
        let gt = generate_ground_truth(3, 5).unwrap();
        let g = build_relative_measurements(&gt, &Topology::Edges(vec![(0, 1), (1, 2)])).unwrap();
        let init = rotations_from(&mst_initialization(&g).unwrap());
        assert!(residual_avg(&g, &init) < 1e-12);
    }

    #[test]
    fn spanning_tree_init_on_complete_graph_is_exact() {
        let gt = generate_ground_truth(8, 9).unwrap();
        let g = build_relative_measurements(&gt, &Topology::Complete).unwrap();
        let init = rotations_from(&mst_initialization(&g).unwrap());
        assert!(residual_avg(&g, &init) < 1e-12);
    }

    #[test]
    fn spanning_tree_uses_reverse_edges() {
        let gt = generate_ground_truth(3, 2).unwrap();
        let g = build_relative_measurements(&gt, &Topology::Edges(vec![(1, 0), (2, 1)])).unwrap();
        let init = rotations_from(&mst_initialization(&g).unwrap());
        assert!(residual_avg(&g, &init) < 1e-12);
    }
}
