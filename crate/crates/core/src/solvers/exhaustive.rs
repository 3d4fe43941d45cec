use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Sample, SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::BinaryQubo;

/// Largest problem enumerated exhaustively.
pub const EXHAUSTIVE_CAP: usize = 24;

/// Number of lowest states kept from the full spectrum.
pub const SPECTRUM_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveSolver;

impl Sampler for ExhaustiveSolver {
    fn sample(&self, qubo: &BinaryQubo, _seed: u64) -> Result<SampleSet> {
        solve_exhaustive(qubo)
    }

    fn name(&self) -> &'static str {
        "exhaustive"
    }
}

#[derive(Clone, Copy)]
struct Entry {
    energy: f64,
    state: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.state.cmp(&other.state))
    }
}

/// Enumerates every state in Gray-code order with incremental energy updates
/// and returns the lowest [`SPECTRUM_LIMIT`] of them.
pub fn solve_exhaustive(qubo: &BinaryQubo) -> Result<SampleSet> {
    let dim = qubo.dim();
    if dim > EXHAUSTIVE_CAP {
        return Err(Error::Capacity {
            dim,
            cap: EXHAUSTIVE_CAP,
        });
    }
    if dim == 0 {
        return Ok(SampleSet::default());
    }
    let diag: Vec<f64> = (0..dim).map(|i| qubo.q[(i, i)] + qubo.c[i]).collect();
    // field[i] = Σ_{j≠i} Q_ij x_j
    let mut field = vec![0.0; dim];
    let mut state: u32 = 0;
    let mut energy = 0.0;
    let mut heap = BinaryHeap::with_capacity(SPECTRUM_LIMIT.min(1 << dim) + 1);
    heap.push(Entry { energy, state });

    let total: u64 = 1 << dim;
    for step in 1..total {
        let k = step.trailing_zeros() as usize;
        let bit = 1u32 << k;
        let sign = if state & bit == 0 { 1.0 } else { -1.0 };
        energy += sign * (diag[k] + 2.0 * field[k]);
        state ^= bit;
        let col = qubo.q.column(k);
        for (i, f) in field.iter_mut().enumerate() {
            if i != k {
                *f += sign * col[i];
            }
        }
        let entry = Entry { energy, state };
        if heap.len() < SPECTRUM_LIMIT {
            heap.push(entry);
        } else if entry < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(entry);
        }
    }

    let samples = heap
        .into_iter()
        .map(|e| {
            let bits: Vec<u8> = (0..dim).map(|i| ((e.state >> i) & 1) as u8).collect();
            Sample {
                energy: qubo.energy(&bits),
                bits,
                multiplicity: 1,
            }
        })
        .collect();
    SampleSet::validated(qubo, samples)
}
