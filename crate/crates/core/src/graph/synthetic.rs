//! Seeded synthetic graph generation.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{is_connected, CameraGraph, Edge};
use crate::error::{Error, Result};
use crate::so3::{exp_map, RotationMatrix, TangentVector};

/// Multiplicative noise `exp(σ·v)` with `v ~ U[0,1]³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    /// Every ordered pair `i ≠ j`.
    Complete,
    /// Explicit ordered pairs.
    Edges(Vec<(usize, usize)>),
}

/// Random absolute rotations: axis uniform on the sphere, angle uniform in `[0, π)`.
pub fn generate_ground_truth(n: usize, seed: u64) -> Result<Vec<RotationMatrix>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "need at least 2 nodes, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let axis = random_unit_vector(&mut rng);
            let angle = rng.random_range(0.0..PI);
            exp_map(&TangentVector(axis * angle))
        })
        .collect())
}

fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Exact measurements `R̃ᵢⱼ = Rⱼ Rᵢᵀ` on the requested topology.
pub fn build_relative_measurements(
    gt: &[RotationMatrix],
    topology: &Topology,
) -> Result<CameraGraph> {
    let n = gt.len();
    if n == 0 {
        return Err(Error::InvalidSize("no ground-truth rotations".into()));
    }
    let pairs: Vec<(usize, usize)> = match topology {
        Topology::Complete => (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect(),
        Topology::Edges(pairs) => pairs.clone(),
    };
    for &(i, j) in &pairs {
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) is invalid for {n} nodes"
            )));
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in &pairs {
        adj[i].push(j);
        adj[j].push(i);
    }
    if !is_connected(n, &adj) {
        return Err(Error::Connectivity(
            "requested topology is disconnected".into(),
        ));
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            rel: RotationMatrix(gt[j].0 * gt[i].0.transpose()),
        })
        .collect();
    CameraGraph::new(n, edges, Some(gt.to_vec()))
}

/// Left-multiplies one direction of every measured pair by `exp(σ·v)`; the
/// opposite direction, when stored, becomes its transpose.
pub fn corrupt_with_noise(graph: &CameraGraph, spec: &NoiseSpec) -> CameraGraph {
    if spec.sigma == 0.0 {
        return graph.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let index: HashMap<(usize, usize), usize> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| ((e.i, e.j), k))
        .collect();
    let mut edges = graph.edges().to_vec();
    for k in 0..edges.len() {
        let (i, j) = (edges[k].i, edges[k].j);
        let reverse = index.get(&(j, i)).copied();
        if reverse.is_some() && i > j {
            continue;
        }
        let v = Vector3::new(
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        );
        let noise = exp_map(&TangentVector(v * spec.sigma));
        edges[k].rel = noise * edges[k].rel;
        if let Some(r) = reverse {
            edges[r].rel = edges[k].rel.transpose();
        }
    }
    CameraGraph {
        n: graph.n(),
        edges,
        ground_truth: graph.ground_truth().map(<[_]>::to_vec),
    }
}

/// Keeps a random subset of `round(keep_ratio · |E|)` undirected pairs that
/// leaves the graph connected.
pub fn sparsify(graph: &CameraGraph, keep_ratio: f64, seed: u64) -> Result<CameraGraph> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "keep_ratio must lie in (0, 1], got {keep_ratio}"
        )));
    }
    if keep_ratio == 1.0 {
        return Ok(graph.clone());
    }
    let n = graph.n();
    let mut pairs: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|e| (e.i.min(e.j), e.i.max(e.j)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let keep = ((pairs.len() as f64) * keep_ratio).round() as usize;
    if keep + 1 < n {
        return Err(Error::Connectivity(format!(
            "keeping {keep} of {} pairs cannot connect {n} nodes",
            pairs.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let connected = |subset: &[(usize, usize)]| {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in subset {
            adj[a].push(b);
            adj[b].push(a);
        }
        is_connected(n, &adj)
    };

    // Rejection sampling keeps the subset uniform among connected ones; the
    // tree-first fallback only kicks in for very sparse requests.
    let mut chosen = None;
    for _ in 0..1000 {
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        shuffled.truncate(keep);
        if connected(&shuffled) {
            chosen = Some(shuffled);
            break;
        }
    }
    let chosen = match chosen {
        Some(c) => c,
        None => spanning_tree_first(n, &pairs, keep, &mut rng),
    };
    if !connected(&chosen) {
        return Err(Error::Connectivity("source graph is disconnected".into()));
    }

    let kept: HashSet<(usize, usize)> = chosen.into_iter().collect();
    let edges = graph
        .edges()
        .iter()
        .filter(|e| kept.contains(&(e.i.min(e.j), e.i.max(e.j))))
        .cloned()
        .collect();
    CameraGraph::new(n, edges, graph.ground_truth().map(<[_]>::to_vec))
}

fn spanning_tree_first<R: Rng>(
    n: usize,
    pairs: &[(usize, usize)],
    keep: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut shuffled = pairs.to_vec();
    shuffled.shuffle(rng);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(keep);
    let mut rest = Vec::new();
    for (a, b) in shuffled {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            tree.push((a, b));
        } else {
            rest.push((a, b));
        }
    }
    let extra = keep.saturating_sub(tree.len());
    tree.extend(rest.into_iter().take(extra));
    tree
}

/// Recipe for a seeded synthetic instance: ground truth from `seed`, noise
/// from `seed + 1`, edge sampling from `seed + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub sigma: f64,
    /// Fraction of unordered pairs kept; `1.0` is the complete graph.
    pub keep_ratio: f64,
    pub seed: u64,
}

pub fn synthetic_graph(spec: &SyntheticSpec) -> Result<CameraGraph> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {}",
            spec.sigma
        )));
    }
    let gt = generate_ground_truth(spec.n, spec.seed)?;
    let complete = build_relative_measurements(&gt, &Topology::Complete)?;
    let kept = sparsify(&complete, spec.keep_ratio, spec.seed.wrapping_add(2))?;
    Ok(corrupt_with_noise(
        &kept,
        &NoiseSpec {
            sigma: spec.sigma,
            seed: spec.seed.wrapping_add(1),
        },
    ))
}
