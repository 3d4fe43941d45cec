//! QUBO sampling backends.
//!
//! Every backend returns a [`SampleSet`] whose energies have been recomputed
//! locally, sorted ascending, with duplicate bitstrings merged into
//! multiplicities.

mod anneal;
mod boltzmann;
mod exhaustive;
mod remote;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qubo::BinaryQubo;

pub use anneal::{solve_simulated_annealing, SaConfig, SimulatedAnnealer};
pub use boltzmann::BoltzmannSampler;
pub use exhaustive::{solve_exhaustive, ExhaustiveSolver, EXHAUSTIVE_CAP, SPECTRUM_LIMIT};
pub use remote::{
    parse_response, solve_remote, RemoteConfig, RemoteSolver, SolveResponse, WireSample, ENV_TOKEN,
    ENV_URL,
};

/// Tolerance for accepting an externally reported energy.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    samples: Vec<Sample>,
    /// Samples whose reported energy disagreed with the local recomputation.
    pub corrected: usize,
}

impl SampleSet {
    /// Merges raw reads (one bitstring per read) and evaluates their energies.
    pub fn from_reads(qubo: &BinaryQubo, reads: Vec<Vec<u8>>) -> Self {
        let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
        for bits in reads {
            *counts.entry(bits).or_insert(0) += 1;
        }
        let samples = counts
            .into_iter()
            .map(|(bits, multiplicity)| Sample {
                energy: qubo.energy(&bits),
                bits,
                multiplicity,
            })
            .collect();
        Self::sorted(samples, 0)
    }

    /// Re-validates reported energies, replacing any that are off by more
    /// than [`ENERGY_TOLERANCE`].
    pub fn validated(qubo: &BinaryQubo, reported: Vec<Sample>) -> Result<Self> {
        let mut merged: HashMap<Vec<u8>, Sample> = HashMap::new();
        let mut corrected = 0;
        for mut s in reported {
            qubo.check_bits(&s.bits)?;
            let local = qubo.energy(&s.bits);
            if !(s.energy - local).abs().le(&ENERGY_TOLERANCE) {
                log::warn!(
                    "reported energy {} disagrees with local {}; using local",
                    s.energy,
                    local
                );
                corrected += 1;
            }
            s.energy = local;
            s.multiplicity = s.multiplicity.max(1);
            merged
                .entry(s.bits.clone())
                .and_modify(|e| e.multiplicity += s.multiplicity)
                .or_insert(s);
        }
        Ok(Self::sorted(merged.into_values().collect(), corrected))
    }

    fn sorted(mut samples: Vec<Sample>, corrected: usize) -> Self {
        samples.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| a.bits.cmp(&b.bits))
        });
        Self { samples, corrected }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    /// Total number of reads, counting multiplicities.
    pub fn total_reads(&self) -> usize {
        self.samples.iter().map(|s| s.multiplicity).sum()
    }

    /// Difference between the two lowest distinct energies (0 when only one
    /// energy level was observed).
    pub fn energy_gap(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        self.samples
            .iter()
            .map(|s| s.energy - first.energy)
            .find(|d| *d > 0.0)
            .unwrap_or(0.0)
    }

    /// Adds one more observation of `bits`, keeping the ordering invariant.
    pub fn insert(&mut self, qubo: &BinaryQubo, bits: Vec<u8>) {
        if let Some(s) = self.samples.iter_mut().find(|s| s.bits == bits) {
            s.multiplicity += 1;
            return;
        }
        let energy = qubo.energy(&bits);
        let samples = std::mem::take(&mut self.samples);
        let mut all = samples;
        all.push(Sample {
            bits,
            energy,
            multiplicity: 1,
        });
        *self = Self::sorted(all, self.corrected);
    }
}

/// Anything that can draw low-energy samples from a QUBO.
pub trait Sampler: Send + Sync {
    fn sample(&self, qubo: &BinaryQubo, seed: u64) -> Result<SampleSet>;

    fn name(&self) -> &'static str;
}

/// Backend selection used by configuration and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Exhaustive,
    Sa(SaConfig),
    Remote(RemoteConfig),
    Boltzmann(BoltzmannSampler),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Sa(SaConfig::default())
    }
}

impl Sampler for Backend {
    fn sample(&self, qubo: &BinaryQubo, seed: u64) -> Result<SampleSet> {
        match self {
            Backend::Exhaustive => ExhaustiveSolver.sample(qubo, seed),
            Backend::Sa(cfg) => SimulatedAnnealer::new(cfg.clone())?.sample(qubo, seed),
            Backend::Remote(cfg) => RemoteSolver::new(cfg.clone()).sample(qubo, seed),
            Backend::Boltzmann(s) => s.sample(qubo, seed),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Backend::Exhaustive => "exhaustive",
            Backend::Sa(_) => "sa",
            Backend::Remote(_) => "remote",
            Backend::Boltzmann(_) => "boltzmann",
        }
    }
}
