use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use qmra_core::iqars::{Init, IqarsConfig, LmConfig, Schedule};
use qmra_core::solvers::{Backend, BoltzmannSampler, RemoteConfig, SaConfig, ENV_TOKEN, ENV_URL};
use qmra_core::RefineConfig;

use crate::config::parse_angle;
use crate::error::{CliError, CliResult};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Iqars,
    Lm,
    Direct,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendArg {
    Sa,
    Exhaustive,
    Remote,
    Boltzmann,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitArg {
    Identity,
    Mst,
}

/// Solver settings shared by `solve` and `benchmark`.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Sampling backend [default: sa]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Reads per QUBO (sa, remote, boltzmann) [default: 100]
    #[arg(long)]
    pub reads: Option<usize>,
    /// Annealing sweeps per read [default: 200]
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub beta_start: Option<f64>,
    #[arg(long)]
    pub beta_end: Option<f64>,
    /// Inverse temperature of the exact Boltzmann sampler [default: 1]
    #[arg(long)]
    pub sampler_beta: Option<f64>,
    /// Remote annealer base URL (falls back to QMRA_ANNEALER_URL)
    #[arg(long)]
    pub url: Option<String>,
    /// Bits per tangent component [default: 3]
    #[arg(long)]
    pub m: Option<usize>,
    /// Initial search radius, e.g. `pi/30` [default: pi/30]
    #[arg(long, value_parser = parse_angle)]
    pub delta0: Option<f64>,
    /// Radius contraction threshold [default: delta0/10]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Radius contraction rate [default: 2]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Orthogonality penalty weight [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stopping residual [default: 1e-8]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// [default: identity]
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Posterior refinement: `off` or `top<K>` such as `top30` [default: off]
    #[arg(long)]
    pub refine: Option<String>,
    /// Refinement inverse temperature [default: 2]
    #[arg(long)]
    pub refine_beta: Option<f64>,
    /// Initial damping of the lm method [default: 1e-3]
    #[arg(long)]
    pub lambda0: Option<f64>,
}

impl SolverOptions {
    /// Replaces every unset field by its default so the result can be
    /// recorded and replayed verbatim.
    pub fn fill_defaults(&mut self) {
        let sa = SaConfig::default();
        let sched = Schedule::default();
        let lm = LmConfig::default();
        self.backend.get_or_insert(BackendArg::Sa);
        self.reads.get_or_insert(sa.reads);
        self.sweeps.get_or_insert(sa.sweeps);
        self.beta_start.get_or_insert(sa.beta_start);
        self.beta_end.get_or_insert(sa.beta_end);
        self.sampler_beta.get_or_insert(1.0);
        self.m.get_or_insert(3);
        let delta0 = *self.delta0.get_or_insert(sched.delta0);
        self.kappa.get_or_insert(delta0 / 10.0);
        self.tau.get_or_insert(sched.tau);
        self.alpha.get_or_insert(sched.alpha);
        self.epsilon.get_or_insert(sched.epsilon);
        self.maxiter.get_or_insert(sched.maxiter);
        self.init.get_or_insert(InitArg::Identity);
        self.refine.get_or_insert_with(|| "off".into());
        self.refine_beta.get_or_insert(RefineConfig::default().beta);
        self.lambda0.get_or_insert(lm.lambda0);
        if self.backend == Some(BackendArg::Remote) && self.url.is_none() {
            self.url = std::env::var(ENV_URL).ok();
        }
    }

    pub fn backend(&self, seed: u64) -> CliResult<Backend> {
        let reads = self.reads.unwrap_or(100);
        Ok(match self.backend.unwrap_or(BackendArg::Sa) {
            BackendArg::Sa => {
                let cfg = SaConfig {
                    reads,
                    sweeps: self.sweeps.unwrap_or(200),
                    beta_start: self.beta_start.unwrap_or(0.1),
                    beta_end: self.beta_end.unwrap_or(10.0),
                    seed,
                };
                cfg.validate()?;
                Backend::Sa(cfg)
            }
            BackendArg::Exhaustive => Backend::Exhaustive,
            BackendArg::Boltzmann => Backend::Boltzmann(BoltzmannSampler {
                beta: self.sampler_beta.unwrap_or(1.0),
                reads,
            }),
            BackendArg::Remote => {
                let url = self
                    .url
                    .clone()
                    .or_else(|| std::env::var(ENV_URL).ok())
                    .ok_or_else(|| {
                        CliError::Backend(format!("no --url given and {ENV_URL} is not set"))
                    })?;
                let token = std::env::var(ENV_TOKEN)
                    .map_err(|_| CliError::Backend(format!("{ENV_TOKEN} is not set")))?;
                Backend::Remote(RemoteConfig {
                    url,
                    token,
                    reads,
                    ..RemoteConfig::default()
                })
            }
        })
    }

    pub fn refine_config(&self) -> CliResult<Option<RefineConfig>> {
        let spec = self.refine.as_deref().unwrap_or("off");
        if spec == "off" {
            return Ok(None);
        }
        let k = spec
            .strip_prefix("top")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k >= 1)
            .ok_or_else(|| {
                CliError::Usage(format!("--refine expects `off` or `top<K>`, got `{spec}`"))
            })?;
        Ok(Some(RefineConfig {
            beta: self.refine_beta.unwrap_or(2.0),
            k,
        }))
    }

    pub fn schedule(&self) -> Schedule {
        let d = Schedule::default();
        Schedule {
            maxiter: self.maxiter.unwrap_or(d.maxiter),
            delta0: self.delta0.unwrap_or(d.delta0),
            kappa: self.kappa,
            tau: self.tau.unwrap_or(d.tau),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            alpha: self.alpha.unwrap_or(d.alpha),
        }
    }

    fn init(&self) -> Init {
        match self.init.unwrap_or(InitArg::Identity) {
            InitArg::Identity => Init::Identity,
            InitArg::Mst => Init::Mst,
        }
    }

    pub fn iqars(&self, seed: u64) -> CliResult<IqarsConfig> {
        let cfg = IqarsConfig {
            schedule: self.schedule(),
            m: self.m.unwrap_or(3),
            backend: self.backend(seed)?,
            init: self.init(),
            refine: self.refine_config()?,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lm(&self) -> CliResult<LmConfig> {
        let cfg = LmConfig {
            schedule: self.schedule(),
            lambda0: self.lambda0.unwrap_or(1e-3),
            init: self.init(),
            ..LmConfig::default()
        };
        cfg.schedule.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    /// Number of cameras
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise level, e.g. `pi/10` [default: 0]
    #[arg(long, value_parser = parse_angle)]
    pub sigma: Option<f64>,
    /// Fraction of camera pairs to keep [default: 1]
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output graph file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Graph file written by `generate`
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// [default: iqars]
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result JSON [default: result.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace CSV [default: <out stem>.trace.csv]
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Run manifest [default: <out stem>.manifest.json]
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverOptions,
}

impl SolveOptions {
    pub fn fill_defaults(&mut self) {
        self.method.get_or_insert(MethodArg::Iqars);
        self.seed.get_or_insert(0);
        let out = self
            .out
            .get_or_insert_with(|| PathBuf::from("result.json"))
            .clone();
        self.trace_out
            .get_or_insert_with(|| sibling(&out, "trace.csv"));
        self.manifest_out
            .get_or_insert_with(|| sibling(&out, "manifest.json"));
        self.solver.fill_defaults();
    }
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkOptions {
    /// Cameras per instance [default: 20]
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated noise levels, e.g. `pi/10,pi/5`
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub sigmas: Option<Vec<f64>>,
    /// Seeds per noise level [default: 10]
    #[arg(long)]
    pub seeds: Option<u64>,
    /// First seed [default: 0]
    #[arg(long)]
    pub first_seed: Option<u64>,
    /// Comma-separated methods [default: iqars,lm,direct]
    #[arg(long, value_delimiter = ',', value_enum)]
    pub methods: Option<Vec<MethodArg>>,
    /// Fraction of camera pairs to keep [default: 1]
    #[arg(long)]
    pub keep_ratio: Option<f64>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV [default: benchmark.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest [default: <out stem>.manifest.json]
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverOptions,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    /// Use the first-iteration QUBO of this graph instead of a random instance
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Bits per component when `--graph` is given [default: 1]
    #[arg(long)]
    pub m: Option<usize>,
    /// Size of the random instance [default: 12]
    #[arg(long)]
    pub bits: Option<usize>,
    /// Seed of the random instance [default: 0]
    #[arg(long)]
    pub instance_seed: Option<u64>,
    /// [default: boltzmann]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Reads per trial [default: 100]
    #[arg(long)]
    pub reads: Option<usize>,
    /// Sampler inverse temperature (boltzmann backend) [default: 1]
    #[arg(long)]
    pub sampler_beta: Option<f64>,
    /// Voting inverse temperature [default: 2]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Voters when no grid is given [default: 30]
    #[arg(long)]
    pub topk: Option<usize>,
    /// Comma-separated voter counts
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// [default: 200]
    #[arg(long)]
    pub trials: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsOptions {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// [default: 3]
    #[arg(long)]
    pub m: Option<usize>,
    /// [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// [default: pi/30]
    #[arg(long, value_parser = parse_angle)]
    pub delta0: Option<f64>,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `dir/name.json` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "result".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refine_flag_parsing() {
        let mut o = SolverOptions::default();
        assert_eq!(o.refine_config().unwrap(), None);
        o.refine = Some("top12".into());
        assert_eq!(o.refine_config().unwrap().unwrap().k, 12);
        o.refine = Some("top0".into());
        assert!(o.refine_config().is_err());
        o.refine = Some("all".into());
        assert!(o.refine_config().is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("out/r.json"), "trace.csv"),
            PathBuf::from("out/r.trace.csv")
        );
    }

    #[test]
    fn defaults_fill_every_field() {
        let mut o = SolveOptions::default();
        o.fill_defaults();
        let v = serde_json::to_value(&o).unwrap();
        let nulls: Vec<_> = v
            .as_object()
            .unwrap()
            .iter()
            .filter(|(_, v)| v.is_null())
            .map(|(k, _)| k.clone())
            .collect();
        assert_eq!(nulls, vec!["graph".to_string(), "url".to_string()]);
    }
}
