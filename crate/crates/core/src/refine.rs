//! Boltzmann-weighted bitwise voting over the lowest-energy samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::BinaryQubo;
use crate::solvers::{SampleSet, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub beta: f64,
    pub k: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { beta: 2.0, k: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResult {
    pub bits: Vec<u8>,
    /// Signed weighted votes; positive means "set the bit".
    pub scores: Vec<f64>,
    /// One weight per voter, in ascending energy order.
    pub weights: Vec<f64>,
    pub refined_energy: f64,
}

/// Affine map of `energies` onto `[0, 1]`; a constant list maps to zeros.
pub fn calibrate_energies(energies: &[f64]) -> Result<Vec<f64>> {
    if energies.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot calibrate an empty spectrum".into(),
        ));
    }
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !span.is_finite() {
        return Err(Error::Numeric("non-finite sample energy".into()));
    }
    if span <= 0.0 {
        return Ok(vec![0.0; energies.len()]);
    }
    Ok(energies.iter().map(|e| (e - lo) / span).collect())
}

/// Votes with the `k` lowest-energy reads of `samples` (a sample observed `c`
/// times votes `c` times). `k` larger than the number of reads is clamped.
pub fn refine(
    qubo: &BinaryQubo,
    samples: &SampleSet,
    beta: f64,
    k: usize,
) -> Result<RefinementResult> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be > 0, got {beta}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let total = samples.total_reads();
    if total == 0 {
        return Err(Error::InvalidParameter(
            "cannot refine an empty sample set".into(),
        ));
    }
    let k = if k > total {
        log::warn!("k = {k} exceeds the {total} available reads; using {total}");
        total
    } else {
        k
    };

    let voters: Vec<_> = samples
        .samples()
        .iter()
        .flat_map(|s| std::iter::repeat_n(s, s.multiplicity))
        .take(k)
        .collect();
    let energies: Vec<f64> = voters.iter().map(|s| s.energy).collect();
    let calibrated = calibrate_energies(&energies)?;
    let raw: Vec<f64> = calibrated.iter().map(|e| (-beta * e).exp()).collect();
    let z: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();

    let dim = qubo.dim();
    let mut scores = vec![0.0; dim];
    for (voter, w) in voters.iter().zip(&weights) {
        qubo.check_bits(&voter.bits)?;
        for (s, b) in scores.iter_mut().zip(&voter.bits) {
            if *b == 1 {
                *s += w;
            } else {
                *s -= w;
            }
        }
    }
    let bits: Vec<u8> = scores.iter().map(|s| u8::from(*s > 0.0)).collect();
    let refined_energy = qubo.energy(&bits);
    Ok(RefinementResult {
        bits,
        scores,
        weights,
        refined_energy,
    })
}

/// Per-`k` outcome of [`refinement_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStats {
    pub k: usize,
    /// Fraction of trials where the refined string beat the best raw read.
    pub improve_freq: f64,
    /// Mean of `best raw energy − refined energy` (positive is better).
    pub mean_delta: f64,
    /// Fraction of trials where the refined energy was at most the median read.
    pub below_median_freq: f64,
}

/// Median energy over all reads, counting multiplicities.
pub fn median_energy(samples: &SampleSet) -> Option<f64> {
    let energies: Vec<f64> = samples
        .samples()
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.energy, s.multiplicity))
        .collect();
    if energies.is_empty() {
        return None;
    }
    let mid = energies.len() / 2;
    Some(if energies.len() % 2 == 1 {
        energies[mid]
    } else {
        0.5 * (energies[mid - 1] + energies[mid])
    })
}

/// Runs `trials` sampler calls (seeded `seed + t`) and refines each result
/// for every `k` in `k_grid`.
pub fn refinement_benchmark(
    qubo: &BinaryQubo,
    sampler: &dyn Sampler,
    beta: f64,
    k_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<RefinementStats>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("k grid is empty".into()));
    }
    let mut improved = vec![0usize; k_grid.len()];
    let mut below = vec![0usize; k_grid.len()];
    let mut delta = vec![0.0; k_grid.len()];
    for t in 0..trials {
        let set = sampler.sample(qubo, seed.wrapping_add(t as u64))?;
        let best = set
            .best()
            .ok_or_else(|| Error::Numeric("sampler returned no samples".into()))?
            .energy;
        let median = median_energy(&set).unwrap_or(best);
        for (idx, &k) in k_grid.iter().enumerate() {
            let r = refine(qubo, &set, beta, k)?;
            if r.refined_energy < best {
                improved[idx] += 1;
            }
            if r.refined_energy <= median {
                below[idx] += 1;
            }
            delta[idx] += best - r.refined_energy;
        }
    }
    let n = trials as f64;
    Ok(k_grid
        .iter()
        .enumerate()
        .map(|(idx, &k)| RefinementStats {
            k,
            improve_freq: improved[idx] as f64 / n,
            mean_delta: delta[idx] / n,
            below_median_freq: below[idx] as f64 / n,
        })
        .collect())
}

/// CSV with header `K,improve_freq,mean_delta,below_median_freq`.
pub fn refinement_csv(stats: &[RefinementStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["K", "improve_freq", "mean_delta", "below_median_freq"])
        .map_err(csv_error)?;
    for s in stats {
        w.write_record([
            s.k.to_string(),
            s.improve_freq.to_string(),
            s.mean_delta.to_string(),
            s.below_median_freq.to_string(),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Numeric(format!("csv encoding failed: {e}"))
}
