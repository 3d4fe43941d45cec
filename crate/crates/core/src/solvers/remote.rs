//! Blocking client for a remote annealing service.
//!
//! `POST {url}/solve` with the [`QuboExport`] payload plus `num_reads`;
//! the service answers `{ "samples": [ { "bits": "0101…", "energy": f, "count": n } ] }`.
//! Bit `k` of the string is variable `k`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Sample, SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::{BinaryQubo, QuboExport};

pub const ENV_URL: &str = "QMRA_ANNEALER_URL";
pub const ENV_TOKEN: &str = "QMRA_ANNEALER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    #[serde(skip_serializing, default)]
    pub token: String,
    pub reads: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            token: String::new(),
            reads: 100,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_ms: 200,
        }
    }
}

impl RemoteConfig {
    /// Reads the endpoint and token from the environment.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| Error::Credential(format!("{ENV_URL} is not set")))?;
        let token = std::env::var(ENV_TOKEN)
            .map_err(|_| Error::Credential(format!("{ENV_TOKEN} is not set")))?;
        Ok(Self {
            url,
            token,
            ..Self::default()
        })
    }
}

#[derive(Serialize)]
struct SolveRequest<'a> {
    #[serde(flatten)]
    qubo: &'a QuboExport,
    num_reads: usize,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveResponse {
    pub samples: Vec<WireSample>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSample {
    pub bits: String,
    pub energy: f64,
    pub count: usize,
}

impl SolveResponse {
    /// Builds a response from a sample set (used by test servers and tooling).
    pub fn from_sample_set(set: &SampleSet) -> Self {
        SolveResponse {
            samples: set
                .samples()
                .iter()
                .map(|s| WireSample {
                    bits: s
                        .bits
                        .iter()
                        .map(|b| if *b == 0 { '0' } else { '1' })
                        .collect(),
                    energy: s.energy,
                    count: s.multiplicity,
                })
                .collect(),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

#[derive(Debug, Clone)]
pub struct RemoteSolver {
    cfg: RemoteConfig,
}

impl RemoteSolver {
    pub fn new(cfg: RemoteConfig) -> Self {
        Self { cfg }
    }

    fn endpoint(&self) -> String {
        format!("{}/solve", self.cfg.url.trim_end_matches('/'))
    }

    fn attempt(&self, agent: &ureq::Agent, body: &SolveRequest<'_>) -> Result<String, Attempt> {
        let resp = agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.cfg.token))
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            401 | 403 => Err(Attempt::Fatal(Error::Credential(format!(
                "server rejected token (HTTP {status})"
            )))),
            500..=599 | 408 | 429 => Err(Attempt::Retry(format!("HTTP {status}: {text}"))),
            _ => Err(Attempt::Fatal(Error::Protocol(format!(
                "unexpected HTTP {status}: {text}"
            )))),
        }
    }

    fn submit(&self, qubo: &BinaryQubo, seed: u64) -> Result<String> {
        if self.cfg.url.is_empty() {
            return Err(Error::Credential(format!(
                "no annealer URL configured ({ENV_URL})"
            )));
        }
        if self.cfg.token.is_empty() {
            return Err(Error::Credential(format!(
                "no annealer token configured ({ENV_TOKEN})"
            )));
        }
        let export = QuboExport::from(qubo);
        let body = SolveRequest {
            qubo: &export,
            num_reads: self.cfg.reads,
            seed,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();

        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1));
                log::warn!("remote solve attempt {attempt} failed ({last}); retrying in {wait} ms");
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(&agent, &body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(Error::Transport {
            attempts: self.cfg.max_retries + 1,
            message: last,
        })
    }
}

/// Parses and re-validates a service response against `qubo`.
pub fn parse_response(qubo: &BinaryQubo, text: &str) -> Result<SampleSet> {
    let resp: SolveResponse = serde_json::from_str(text)
        .map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
    let dim = qubo.dim();
    let samples = resp
        .samples
        .into_iter()
        .enumerate()
        .map(|(idx, s)| {
            if s.bits.len() != dim {
                return Err(Error::Protocol(format!(
                    "sample {idx} has {} bits, expected {dim}",
                    s.bits.len()
                )));
            }
            let bits = s
                .bits
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Protocol(format!(
                        "sample {idx} contains invalid bit {other:?}"
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            if s.count == 0 {
                return Err(Error::Protocol(format!("sample {idx} has zero count")));
            }
            Ok(Sample {
                bits,
                energy: s.energy,
                multiplicity: s.count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(Error::Protocol("response contains no samples".into()));
    }
    SampleSet::validated(qubo, samples)
}

impl Sampler for RemoteSolver {
    fn sample(&self, qubo: &BinaryQubo, seed: u64) -> Result<SampleSet> {
        let text = self.submit(qubo, seed)?;
        parse_response(qubo, &text)
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

pub fn solve_remote(qubo: &BinaryQubo, cfg: &RemoteConfig) -> Result<SampleSet> {
    RemoteSolver::new(cfg.clone()).sample(qubo, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn qubo() -> BinaryQubo {
        BinaryQubo::new(
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 0.5]),
            DVector::from_vec(vec![-1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn wrong_bit_length_is_protocol_error() {
        let text = r#"{ "samples": [ { "bits": "010", "energy": 0.0, "count": 1 } ] }"#;
        assert!(matches!(
            parse_response(&qubo(), text),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn schema_mismatch_is_protocol_error() {
        assert!(matches!(
            parse_response(&qubo(), r#"{ "results": [] }"#),
            Err(Error::Protocol(_))
        ));
        let text = r#"{ "samples": [ { "bits": "0x", "energy": 0.0, "count": 1 } ] }"#;
        assert!(matches!(
            parse_response(&qubo(), text),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn local_energy_wins_on_mismatch() {
        let text = r#"{ "samples": [ { "bits": "11", "energy": 5.0, "count": 2 },
                                     { "bits": "00", "energy": 0.0, "count": 1 } ] }"#;
        let set = parse_response(&qubo(), text).unwrap();
        assert_eq!(set.corrected, 1);
        assert_eq!(set.best().unwrap().bits, vec![1, 1]);
        assert_eq!(set.best().unwrap().energy, -1.5);
        assert_eq!(set.total_reads(), 3);
    }

    #[test]
    fn missing_configuration_is_credential_error() {
        let solver = RemoteSolver::new(RemoteConfig::default());
        assert!(matches!(
            solver.sample(&qubo(), 0),
            Err(Error::Credential(_))
        ));
    }
}
