//! QUBO construction for rotation averaging.
//!
//! The pipeline per iteration is
//! `CameraGraph → CostMatrix → LinearizedSubproblem → BinaryQubo`, with
//! [`fold_linear`] and [`to_ising`] giving the pure-quadratic and spin views
//! consumed by annealing hardware.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CameraGraph;
use crate::so3::{exp_jacobian, exp_map, TangentVector};

/// Entries below this magnitude count as structural zeros.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Largest supported bits-per-dimension.
pub const MAX_BITS: usize = 16;

/// `Q` with `RᵀQR = Σ −2 tr(Rᵢᵀ R̃ᵢⱼᵀ Rⱼ)` over stored edges and the diagonal
/// pairs `R̃ᵢᵢ = I`, so that on SO(3) it differs from the chordal objective by
/// a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    q: DMatrix<f64>,
    n: usize,
}

impl CostMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// The 9×9 block coupling `vec(Rᵢ)` and `vec(Rⱼ)`.
    pub fn block(&self, i: usize, j: usize) -> SMatrix<f64, 9, 9> {
        self.q.fixed_view::<9, 9>(9 * i, 9 * j).into_owned()
    }

    /// `RᵀQR` for stacked column-major rotations.
    pub fn quadratic_form(&self, stacked: &DVector<f64>) -> f64 {
        stacked.dot(&(&self.q * stacked))
    }
}

/// `vec(R₁), …, vec(R_N)` stacked into one 9N vector.
pub fn stack_rotations(tangents: &[TangentVector]) -> DVector<f64> {
    let mut out = DVector::zeros(9 * tangents.len());
    for (i, v) in tangents.iter().enumerate() {
        out.rows_mut(9 * i, 9)
            .copy_from_slice(exp_map(v).0.as_slice());
    }
    out
}

/// `I₃ ⊗ M` under column-stacking.
fn kron_identity(m: &Matrix3<f64>) -> SMatrix<f64, 9, 9> {
    let mut out = SMatrix::<f64, 9, 9>::zeros();
    for b in 0..3 {
        out.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(m);
    }
    out
}

pub fn build_cost_matrix(graph: &CameraGraph) -> CostMatrix {
    let n = graph.n();
    let mut q = DMatrix::zeros(9 * n, 9 * n);
    for i in 0..n {
        q.fixed_view_mut::<9, 9>(9 * i, 9 * i)
            .copy_from(&(SMatrix::<f64, 9, 9>::identity() * -2.0));
    }
    for e in graph.edges() {
        let block = kron_identity(&e.rel.0.transpose()) * -2.0;
        q.fixed_view_mut::<9, 9>(9 * e.i, 9 * e.j).copy_from(&block);
    }
    // Graphs storing only one direction of a pair give a non-symmetric
    // matrix; the symmetric part carries the same quadratic form.
    let q = (&q + q.transpose()) * 0.5;
    CostMatrix { q, n }
}

/// Continuous quadratic model `Δvᵀ Q̂ Δv + ĉᵀ Δv` of the penalized objective
/// around the current tangents, valid on the box `‖Δv‖_∞ ≤ δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSubproblem {
    pub q_hat: DMatrix<f64>,
    pub c_hat: DVector<f64>,
    pub delta: f64,
    pub alpha: f64,
    /// `R(v)ᵀ (Q + αN I) R(v)`, the value of the model at `Δv = 0`.
    pub constant: f64,
}

impl LinearizedSubproblem {
    pub fn dim(&self) -> usize {
        self.c_hat.len()
    }

    /// `Δvᵀ Q̂ Δv + ĉᵀ Δv`, without [`Self::constant`].
    pub fn objective(&self, dv: &DVector<f64>) -> f64 {
        dv.dot(&(&self.q_hat * dv)) + self.c_hat.dot(dv)
    }
}

pub fn linearize(
    cost: &CostMatrix,
    tangents: &[TangentVector],
    alpha: f64,
    delta: f64,
) -> Result<LinearizedSubproblem> {
    let n = cost.n();
    if tangents.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: tangents.len(),
            context: "tangent vectors for linearization",
        });
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    let penalty = alpha * n as f64;
    let jac: Vec<SMatrix<f64, 3, 9>> = tangents.iter().map(exp_jacobian).collect();
    let rot: Vec<SMatrix<f64, 9, 1>> = tangents
        .iter()
        .map(|v| SMatrix::<f64, 9, 1>::from_column_slice(exp_map(v).0.as_slice()))
        .collect();

    let mut q_hat = DMatrix::zeros(3 * n, 3 * n);
    let mut c_hat = DVector::zeros(3 * n);
    let mut constant = 0.0;
    for i in 0..n {
        let mut grad = SMatrix::<f64, 3, 1>::zeros();
        for j in 0..n {
            let mut a = cost.block(i, j);
            if i == j {
                a += SMatrix::<f64, 9, 9>::identity() * penalty;
            }
            if a.iter().all(|x| x.abs() <= 0.0) {
                continue;
            }
            let ja = jac[i] * a;
            q_hat
                .fixed_view_mut::<3, 3>(3 * i, 3 * j)
                .copy_from(&(ja * jac[j].transpose()));
            grad += ja * rot[j];
            constant += (rot[i].transpose() * a * rot[j])[(0, 0)];
        }
        c_hat.fixed_rows_mut::<3>(3 * i).copy_from(&(grad * 2.0));
    }
    let q_hat = (&q_hat + q_hat.transpose()) * 0.5;
    Ok(LinearizedSubproblem {
        q_hat,
        c_hat,
        delta,
        alpha,
        constant,
    })
}

/// How the bits of a [`BinaryQubo`] map back to the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuboLayout {
    /// Fixed-point tangent increments, `m` bits per component of `3n` components.
    Tangent { n: usize, m: usize, delta: f64 },
    /// Per-node activations of `columns` basis matrices.
    Basis { n: usize, columns: usize },
    /// No decoding information (imported or synthetic instances).
    Raw,
}

/// `min qᵀ Q q + cᵀ q` over binary `q`; `offset` reconciles the energy with
/// the continuous objective it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryQubo {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub offset: f64,
    pub layout: QuboLayout,
}

impl BinaryQubo {
    /// A raw instance; `q` is symmetrized.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != c.len() {
            return Err(Error::Dimension {
                expected: c.len(),
                actual: q.nrows(),
                context: "QUBO matrix vs linear term",
            });
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self {
            q,
            c,
            offset: 0.0,
            layout: QuboLayout::Raw,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `qᵀQq + cᵀq` (the offset is not included).
    pub fn energy(&self, bits: &[u8]) -> f64 {
        let active: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b != 0).then_some(i))
            .collect();
        let mut e = 0.0;
        for &i in &active {
            e += self.c[i];
            let row = self.q.column(i);
            for &j in &active {
                e += row[j];
            }
        }
        e
    }

    pub fn check_bits(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: bits.len(),
                context: "bitstring length",
            });
        }
        Ok(())
    }
}

/// `D` with `Δv = −δ𝟙 + D q`.
pub fn encoding_matrix(components: usize, m: usize, delta: f64) -> DMatrix<f64> {
    let weights = level_weights(m, delta);
    let mut d = DMatrix::zeros(components, components * m);
    for i in 0..components {
        for (l, w) in weights.iter().enumerate() {
            d[(i, i * m + l)] = *w;
        }
    }
    d
}

fn level_weights(m: usize, delta: f64) -> Vec<f64> {
    let s = ((1u64 << m) - 1) as f64;
    (0..m)
        .map(|l| 2.0 * delta / s * (1u64 << l) as f64)
        .collect()
}

/// Fixed-point binarization of a linearized subproblem with `m` bits per
/// component; `offset` is `δ²𝟙ᵀQ̂𝟙 − δĉᵀ𝟙`.
pub fn binarize(sub: &LinearizedSubproblem, m: usize) -> Result<BinaryQubo> {
    if m == 0 || m > MAX_BITS {
        return Err(Error::InvalidParameter(format!(
            "bits per dimension must lie in 1..={MAX_BITS}, got {m}"
        )));
    }
    let comps = sub.dim();
    if !comps.is_multiple_of(3) {
        return Err(Error::Dimension {
            expected: 3 * (comps / 3 + 1),
            actual: comps,
            context: "subproblem dimension must be a multiple of 3",
        });
    }
    let delta = sub.delta;
    let weights = level_weights(m, delta);
    let ones = DVector::from_element(comps, 1.0);
    let q_ones = &sub.q_hat * &ones;
    let shifted = &sub.c_hat - &q_ones * (2.0 * delta);

    let dim = comps * m;
    let mut q = DMatrix::zeros(dim, dim);
    let mut c = DVector::zeros(dim);
    for i in 0..comps {
        for (l, wl) in weights.iter().enumerate() {
            let row = i * m + l;
            c[row] = wl * shifted[i];
            for j in 0..comps {
                let qij = sub.q_hat[(i, j)];
                if qij == 0.0 {
                    continue;
                }
                for (k, wk) in weights.iter().enumerate() {
                    q[(row, j * m + k)] = qij * wl * wk;
                }
            }
        }
    }
    let offset = delta * delta * ones.dot(&q_ones) - delta * sub.c_hat.sum();
    Ok(BinaryQubo {
        q,
        c,
        offset,
        layout: QuboLayout::Tangent {
            n: comps / 3,
            m,
            delta,
        },
    })
}

/// `(Δv)ᵢ = −δ + (2δ/s) Σ_ℓ 2^ℓ q_{i,ℓ}` with `s = 2^m − 1`.
pub fn decode_bits(bits: &[u8], m: usize, delta: f64) -> Result<DVector<f64>> {
    if m == 0 || m > MAX_BITS {
        return Err(Error::InvalidParameter(format!(
            "bits per dimension must lie in 1..={MAX_BITS}, got {m}"
        )));
    }
    if !bits.len().is_multiple_of(3 * m) {
        return Err(Error::Dimension {
            expected: 3 * m * (bits.len() / (3 * m)).max(1),
            actual: bits.len(),
            context: "bitstring length must be a multiple of 3m",
        });
    }
    let s = ((1u64 << m) - 1) as f64;
    let comps = bits.len() / m;
    Ok(DVector::from_fn(comps, |i, _| {
        let level: u64 = (0..m)
            .filter(|&l| bits[i * m + l] != 0)
            .map(|l| 1u64 << l)
            .sum();
        -delta + 2.0 * delta * level as f64 / s
    }))
}

/// Dense instance with couplings and fields drawn uniformly from `[−1, 1]`.
pub fn random_qubo(dim: usize, seed: u64) -> BinaryQubo {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.random_range(-1.0..1.0);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    let c = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    BinaryQubo {
        q,
        c,
        offset: 0.0,
        layout: QuboLayout::Raw,
    }
}

/// Folds the linear term onto the diagonal using `x² = x`.
pub fn fold_linear(b: &BinaryQubo) -> DMatrix<f64> {
    let mut q = b.q.clone();
    for i in 0..b.dim() {
        q[(i, i)] += b.c[i];
    }
    q
}

/// Spin form `Σ hᵢ sᵢ + Σ_{i<j} Jᵢⱼ sᵢ sⱼ + offset` under `xᵢ = (1 − sᵢ)/2`,
/// i.e. bit 0 is spin +1 and bit 1 is spin −1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub h: Vec<f64>,
    /// Upper-triangular couplings `(i, j, Jᵢⱼ)` with `i < j`.
    pub j: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let field: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * s as f64).sum();
        let coupling: f64 = self
            .j
            .iter()
            .map(|&(a, b, v)| v * (spins[a] * spins[b]) as f64)
            .sum();
        field + coupling + self.offset
    }
}

/// Spin corresponding to a bit.
pub fn bit_to_spin(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

pub fn to_ising(q: &DMatrix<f64>) -> IsingModel {
    let n = q.nrows();
    let mut h = vec![0.0; n];
    let mut j = Vec::new();
    let mut offset = 0.0;
    for a in 0..n {
        offset += q[(a, a)];
        for b in 0..n {
            offset += q[(a, b)];
            h[a] -= q[(a, b)] + q[(b, a)];
        }
        for b in (a + 1)..n {
            let v = q[(a, b)] + q[(b, a)];
            if v != 0.0 {
                j.push((a, b, v / 4.0));
            }
        }
    }
    h.iter_mut().for_each(|x| *x /= 4.0);
    IsingModel {
        h,
        j,
        offset: offset / 4.0,
    }
}

/// Basis-matrix weights of the direct formulation; `0.1` appears twice.
pub const DIRECT_WEIGHTS: [f64; 5] = [0.5, 0.2, 0.1, 0.1, 0.05];

/// The 14 signed generators `±I, ±M₁…±M₆`.
pub fn direct_generators() -> Vec<Matrix3<f64>> {
    let m = [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
    ];
    let mut out = vec![Matrix3::identity(), -Matrix3::identity()];
    for g in m {
        out.push(g);
        out.push(-g);
    }
    out
}

/// 9×L matrix whose columns are `vec(w·C)` over weights × generators.
pub fn direct_basis() -> DMatrix<f64> {
    let gens = direct_generators();
    let cols: Vec<DVector<f64>> = DIRECT_WEIGHTS
        .iter()
        .flat_map(|w| {
            gens.iter()
                .map(move |g| DVector::from_column_slice((g * *w).as_slice()))
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Direct QUBO over per-node basis activations, `Q̃ = Bᵀ Q B` blockwise.
pub fn build_direct_qubo(graph: &CameraGraph) -> BinaryQubo {
    let cost = build_cost_matrix(graph);
    let basis = direct_basis();
    let l = basis.ncols();
    let n = graph.n();
    let mut q = DMatrix::zeros(n * l, n * l);
    for i in 0..n {
        for j in 0..n {
            let block = cost.block(i, j);
            if block.iter().all(|x| *x == 0.0) {
                continue;
            }
            let projected = basis.transpose() * block * &basis;
            q.view_mut((i * l, j * l), (l, l)).copy_from(&projected);
        }
    }
    BinaryQubo {
        q,
        c: DVector::zeros(n * l),
        offset: 0.0,
        layout: QuboLayout::Basis { n, columns: l },
    }
}

/// Sums the activated basis matrices for each node (before any projection).
pub fn decode_direct(bits: &[u8], n: usize) -> Result<Vec<Matrix3<f64>>> {
    let basis = direct_basis();
    let l = basis.ncols();
    if bits.len() != n * l {
        return Err(Error::Dimension {
            expected: n * l,
            actual: bits.len(),
            context: "direct bitstring length",
        });
    }
    Ok((0..n)
        .map(|i| {
            let mut acc = DVector::zeros(9);
            for k in 0..l {
                if bits[i * l + k] != 0 {
                    acc += basis.column(k);
                }
            }
            Matrix3::from_column_slice(acc.as_slice())
        })
        .collect())
}

/// `3·n·m`.
pub fn logical_qubit_count(n: usize, m: usize) -> usize {
    3 * n * m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityStats {
    pub dim: usize,
    pub nonzeros: usize,
    pub nonzero_fraction: f64,
    pub bandwidth: usize,
    /// Off-diagonal nonzeros per row → number of rows with that degree.
    pub degree_histogram: BTreeMap<usize, usize>,
}

impl SparsityStats {
    /// Two-column `key,value` CSV.
    pub fn to_csv(&self, qubits: Option<usize>) -> String {
        let mut out = String::from("key,value\n");
        out += &format!("dim,{}\n", self.dim);
        if let Some(q) = qubits {
            out += &format!("logical_qubits,{q}\n");
        }
        out += &format!("nonzeros,{}\n", self.nonzeros);
        out += &format!("nonzero_fraction,{}\n", self.nonzero_fraction);
        out += &format!("bandwidth,{}\n", self.bandwidth);
        for (deg, rows) in &self.degree_histogram {
            out += &format!("degree_{deg},{rows}\n");
        }
        out
    }
}

pub fn coupling_sparsity_stats(b: &BinaryQubo) -> SparsityStats {
    let dim = b.dim();
    let mut nonzeros = 0;
    let mut bandwidth = 0;
    let mut histogram = BTreeMap::new();
    for i in 0..dim {
        let mut degree = 0;
        for j in 0..dim {
            if b.q[(i, j)].abs() > ZERO_TOLERANCE {
                nonzeros += 1;
                bandwidth = bandwidth.max(i.abs_diff(j));
                if i != j {
                    degree += 1;
                }
            }
        }
        *histogram.entry(degree).or_insert(0) += 1;
    }
    SparsityStats {
        dim,
        nonzeros,
        nonzero_fraction: if dim == 0 {
            0.0
        } else {
            nonzeros as f64 / (dim * dim) as f64
        },
        bandwidth,
        degree_histogram: histogram,
    }
}

/// Interchange format, also the payload of the remote solver protocol.
/// Energies are `Σ v·qᵢqⱼ` over `quadratic` plus `Σ linear·q`; `offset` is
/// informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboExport {
    pub dim: usize,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl From<&BinaryQubo> for QuboExport {
    fn from(b: &BinaryQubo) -> Self {
        let dim = b.dim();
        let mut quadratic = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let v = if i == j {
                    b.q[(i, i)]
                } else {
                    b.q[(i, j)] + b.q[(j, i)]
                };
                if v != 0.0 {
                    quadratic.push((i, j, v));
                }
            }
        }
        QuboExport {
            dim,
            quadratic,
            linear: b.c.iter().copied().collect(),
            offset: b.offset,
        }
    }
}

impl TryFrom<&QuboExport> for BinaryQubo {
    type Error = Error;

    fn try_from(x: &QuboExport) -> Result<Self> {
        if x.linear.len() != x.dim {
            return Err(Error::Protocol(format!(
                "linear has {} entries for dim {}",
                x.linear.len(),
                x.dim
            )));
        }
        let mut q = DMatrix::zeros(x.dim, x.dim);
        for &(i, j, v) in &x.quadratic {
            if i >= x.dim || j >= x.dim {
                return Err(Error::Protocol(format!("coupling ({i}, {j}) out of range")));
            }
            if i == j {
                q[(i, i)] += v;
            } else {
                q[(i, j)] += v / 2.0;
                q[(j, i)] += v / 2.0;
            }
        }
        Ok(BinaryQubo {
            q,
            c: DVector::from_vec(x.linear.clone()),
            offset: x.offset,
            layout: QuboLayout::Raw,
        })
    }
}
