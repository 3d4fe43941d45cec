use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::BinaryQubo;

/// Largest instance the exact sampler will enumerate.
const BOLTZMANN_CAP: usize = 20;

/// Draws independent reads from the exact Gibbs distribution
/// `p(q) ∝ exp(−β E(q))` by enumerating the whole state space. Serves as an
/// idealized thermal sampler for small instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannSampler {
    pub beta: f64,
    pub reads: usize,
}

impl Sampler for BoltzmannSampler {
    fn sample(&self, qubo: &BinaryQubo, seed: u64) -> Result<SampleSet> {
        let dim = qubo.dim();
        if dim > BOLTZMANN_CAP {
            return Err(Error::Capacity {
                dim,
                cap: BOLTZMANN_CAP,
            });
        }
        if !(self.beta > 0.0) || self.reads == 0 {
            return Err(Error::InvalidParameter(
                "Boltzmann sampler needs beta > 0 and reads >= 1".into(),
            ));
        }
        let states = 1usize << dim;
        let energies: Vec<f64> = (0..states)
            .map(|x| qubo.energy(&state_bits(x, dim)))
            .collect();
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let mut cumulative = Vec::with_capacity(states);
        let mut acc = 0.0;
        for e in &energies {
            acc += (-self.beta * (e - min)).exp();
            cumulative.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reads = (0..self.reads)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let idx = cumulative.partition_point(|c| *c < u).min(states - 1);
                state_bits(idx, dim)
            })
            .collect();
        Ok(SampleSet::from_reads(qubo, reads))
    }

    fn name(&self) -> &'static str {
        "boltzmann"
    }
}

fn state_bits(x: usize, dim: usize) -> Vec<u8> {
    (0..dim).map(|i| ((x >> i) & 1) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn frequencies_follow_boltzmann_weights() {
        // two states with energy gap 1
        let q = BinaryQubo::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![1.0])).unwrap();
        let s = BoltzmannSampler {
            beta: 1.0,
            reads: 20000,
        };
        let set = s.sample(&q, 3).unwrap();
        let zero = set.samples().iter().find(|x| x.bits == vec![0]).unwrap();
        let p0 = zero.multiplicity as f64 / 20000.0;
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p0 - expected).abs() < 0.02, "{p0} vs {expected}");
    }
}
