//! Single-flip Metropolis simulated annealing.
//!
//! Inverse temperatures are expressed in units of the largest QUBO
//! coefficient, so one schedule works across instances whose energy scale
//! differs by orders of magnitude (as the iterative subproblems do when the
//! search radius contracts).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::BinaryQubo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub reads: usize,
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            reads: 100,
            sweeps: 200,
            beta_start: 0.1,
            beta_end: 10.0,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reads == 0 || self.sweeps == 0 {
            return Err(Error::InvalidParameter(
                "reads and sweeps must be >= 1".into(),
            ));
        }
        if !(self.beta_start > 0.0 && self.beta_end > self.beta_start) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta_start < beta_end, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// Geometric schedule, one β per sweep.
    pub fn schedule(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_end];
        }
        let ratio = (self.beta_end / self.beta_start).ln() / (self.sweeps - 1) as f64;
        (0..self.sweeps)
            .map(|s| self.beta_start * (ratio * s as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedAnnealer {
    cfg: SaConfig,
}

impl SimulatedAnnealer {
    pub fn new(cfg: SaConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SaConfig {
        &self.cfg
    }

    fn read_rng(seed: u64, read: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(read as u64);
        rng
    }

    /// Runs one read, returning the final state and the energy after each
    /// sweep.
    pub fn run_read(&self, qubo: &BinaryQubo, seed: u64, read: usize) -> (Vec<u8>, Vec<f64>) {
        self.anneal(qubo, energy_scale(qubo), seed, read)
    }

    fn anneal(&self, qubo: &BinaryQubo, scale: f64, seed: u64, read: usize) -> (Vec<u8>, Vec<f64>) {
        let mut rng = Self::read_rng(seed, read);
        let dim = qubo.dim();
        let diag: Vec<f64> = (0..dim).map(|i| qubo.q[(i, i)] + qubo.c[i]).collect();
        let mut bits: Vec<u8> = (0..dim).map(|_| rng.random_range(0..2u8)).collect();
        let mut field = vec![0.0; dim];
        for (i, f) in field.iter_mut().enumerate() {
            *f = (0..dim)
                .filter(|&j| j != i && bits[j] == 1)
                .map(|j| qubo.q[(i, j)])
                .sum();
        }
        let mut energy = qubo.energy(&bits);
        let mut trace = Vec::with_capacity(self.cfg.sweeps);
        for beta in self.cfg.schedule() {
            let beta = beta / scale;
            for k in 0..dim {
                let sign = if bits[k] == 0 { 1.0 } else { -1.0 };
                let delta_e = sign * (diag[k] + 2.0 * field[k]);
                let accept = delta_e <= 0.0 || rng.random::<f64>() < (-beta * delta_e).exp();
                if accept {
                    bits[k] ^= 1;
                    energy += delta_e;
                    let col = qubo.q.column(k);
                    for (i, f) in field.iter_mut().enumerate() {
                        if i != k {
                            *f += sign * col[i];
                        }
                    }
                }
            }
            trace.push(energy);
        }
        (bits, trace)
    }
}

/// Largest coupling or effective field magnitude; 1 for an all-zero QUBO.
fn energy_scale(qubo: &BinaryQubo) -> f64 {
    let dim = qubo.dim();
    let mut scale: f64 = 0.0;
    for i in 0..dim {
        scale = scale.max((qubo.q[(i, i)] + qubo.c[i]).abs());
        for j in 0..dim {
            if i != j {
                scale = scale.max(2.0 * qubo.q[(i, j)].abs());
            }
        }
    }
    if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    }
}

impl Sampler for SimulatedAnnealer {
    fn sample(&self, qubo: &BinaryQubo, seed: u64) -> Result<SampleSet> {
        if qubo.dim() == 0 {
            return Err(Error::InvalidParameter(
                "cannot anneal an empty QUBO".into(),
            ));
        }
        let scale = energy_scale(qubo);
        let reads: Vec<Vec<u8>> = (0..self.cfg.reads)
            .into_par_iter()
            .map(|r| self.anneal(qubo, scale, seed, r).0)
            .collect();
        Ok(SampleSet::from_reads(qubo, reads))
    }

    fn name(&self) -> &'static str {
        "sa"
    }
}

/// Convenience entry point using the seed stored in the config.
pub fn solve_simulated_annealing(qubo: &BinaryQubo, cfg: &SaConfig) -> Result<SampleSet> {
    SimulatedAnnealer::new(cfg.clone())?.sample(qubo, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn random_qubo(dim: usize, seed: u64) -> BinaryQubo {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let c = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        BinaryQubo::new(q, c).unwrap()
    }

    #[test]
    fn schedule_is_geometric() {
        let cfg = SaConfig::default();
        let s = cfg.schedule();
        assert_eq!(s.len(), 200);
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((s[199] - 10.0).abs() < 1e-12);
        let r0 = s[1] / s[0];
        assert!(s.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SaConfig {
            beta_end: 0.05,
            ..SaConfig::default()
        };
        assert!(SimulatedAnnealer::new(bad).is_err());
        let bad = SaConfig {
            reads: 0,
            ..SaConfig::default()
        };
        assert!(SimulatedAnnealer::new(bad).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let q = random_qubo(20, 1);
        let cfg = SaConfig {
            reads: 16,
            sweeps: 50,
            seed: 77,
            ..SaConfig::default()
        };
        let a = solve_simulated_annealing(&q, &cfg).unwrap();
        let b = solve_simulated_annealing(&q, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_tail_only_moves_downhill() {
        let q = random_qubo(24, 3);
        let cfg = SaConfig {
            reads: 1,
            sweeps: 60,
            beta_start: 0.1,
            beta_end: 1e9,
            seed: 4,
        };
        let sa = SimulatedAnnealer::new(cfg).unwrap();
        for read in 0..5 {
            let (bits, trace) = sa.run_read(&q, 4, read);
            let tail = &trace[trace.len() - 10..];
            assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{tail:?}");
            assert!((trace.last().unwrap() - q.energy(&bits)).abs() < 1e-9);
        }
    }
}
