//! The iterative estimation loop, the continuous damped baseline and the
//! one-shot direct pipeline.
//!
//! Each iteration linearizes the penalized objective around the current
//! tangents, binarizes the resulting box-constrained quadratic, samples it
//! and applies the decoded step if it does not increase the measurement
//! residual. When the accepted update stalls below `κ`, both the search
//! radius `δ` and `κ` shrink by `τ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    angle_error, chordal_error, mst_initialization, residual_avg, residual_norm_avg, CameraGraph,
};
use crate::qubo::{
    binarize, build_cost_matrix, build_direct_qubo, decode_bits, decode_direct, linearize,
    LinearizedSubproblem, MAX_BITS,
};
use crate::refine::{csv_error, refine, RefineConfig};
use crate::so3::{project_to_so3, RotationMatrix, TangentVector};
use crate::solvers::{Backend, Sampler};

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Identity,
    Mst,
    Explicit(Vec<TangentVector>),
}

pub fn initial_tangents(graph: &CameraGraph, init: &Init) -> Result<Vec<TangentVector>> {
    match init {
        Init::Identity => Ok(vec![TangentVector::zero(); graph.n()]),
        Init::Mst => mst_initialization(graph),
        Init::Explicit(v) => {
            if v.len() != graph.n() {
                return Err(Error::Dimension {
                    expected: graph.n(),
                    actual: v.len(),
                    context: "explicit initial tangents",
                });
            }
            if let Some(i) = v.iter().position(|t| !t.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "initial tangent {i} is not finite"
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Radius schedule shared by the sampled and the continuous loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub maxiter: usize,
    pub delta0: f64,
    /// Stall threshold; `None` means `delta0 / 10`.
    pub kappa: Option<f64>,
    pub tau: f64,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            maxiter: 100,
            delta0: PI / 30.0,
            kappa: None,
            tau: 2.0,
            epsilon: 1e-8,
            alpha: 0.5,
        }
    }
}

impl Schedule {
    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(self.delta0 / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.maxiter == 0 {
            return bad("maxiter must be >= 1".into());
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return bad(format!("delta0 must be > 0, got {}", self.delta0));
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 1, got {}", self.tau));
        }
        if !(self.kappa() >= 0.0) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa()));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqarsConfig {
    #[serde(flatten)]
    pub schedule: Schedule,
    /// Bits per tangent component.
    pub m: usize,
    pub backend: Backend,
    pub init: Init,
    pub refine: Option<RefineConfig>,
    pub seed: u64,
}

impl Default for IqarsConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            m: 3,
            backend: Backend::default(),
            init: Init::Identity,
            refine: None,
            seed: 0,
        }
    }
}

impl IqarsConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.m == 0 || self.m > MAX_BITS {
            return Err(Error::InvalidParameter(format!(
                "m must lie in 1..={MAX_BITS}, got {}",
                self.m
            )));
        }
        if let Some(r) = &self.refine {
            if !(r.beta > 0.0) || r.k == 0 {
                return Err(Error::InvalidParameter(
                    "refinement needs beta > 0 and k >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Measurement residual after this iteration.
    pub residual: f64,
    /// Energy of the chosen sample (model value for the continuous solver).
    pub best_energy: f64,
    pub energy_gap: f64,
    /// Radius used in this iteration.
    pub delta: f64,
    /// `‖R(vʲ) − R(vʲ⁻¹)‖_F` over all nodes; zero when the step was rejected.
    pub update_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Iqars,
    Lm,
    Direct,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Iqars => "iqars",
            Method::Lm => "lm",
            Method::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub rotations: Vec<RotationMatrix>,
    pub tangents: Vec<TangentVector>,
    /// Mean squared chordal residual over the measurements.
    pub residual: f64,
    /// Mean unsquared chordal residual over the measurements.
    pub residual_norm: f64,
    /// Mean geodesic error to ground truth (radians), when known.
    pub angle_error: Option<f64>,
    /// Mean chordal distance to ground truth, when known.
    pub chordal_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    /// Nodes whose decoded matrix could not be projected onto SO(3).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projection_failures: Vec<usize>,
    /// Backend energies that had to be recomputed locally.
    #[serde(default)]
    pub corrected_energies: usize,
}

impl EstimationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// CSV with header `iter,residual,best_energy,energy_gap,delta,update_norm,accepted`.
    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.trace {
            w.serialize(r).map_err(csv_error)?;
        }
        if self.trace.is_empty() {
            w.write_record([
                "iter",
                "residual",
                "best_energy",
                "energy_gap",
                "delta",
                "update_norm",
                "accepted",
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn exp_all(v: &[TangentVector]) -> Vec<RotationMatrix> {
    v.iter().map(TangentVector::exp).collect()
}

fn checked_residual(graph: &CameraGraph, rot: &[RotationMatrix], iter: usize) -> Result<f64> {
    let e = residual_avg(graph, rot);
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Numeric(format!(
            "residual is not finite at iteration {iter}"
        )))
    }
}

fn update_norm(a: &[RotationMatrix], b: &[RotationMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.0 - y.0).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Adds `dv` to the stacked tangents, re-wrapping any that left the ball of
/// radius π.
fn step(v: &[TangentVector], dv: &DVector<f64>) -> Vec<TangentVector> {
    v.iter()
        .enumerate()
        .map(|(i, t)| {
            let moved = TangentVector(t.0 + dv.fixed_rows::<3>(3 * i));
            if moved.angle() > PI {
                moved.exp().log()
            } else {
                moved
            }
        })
        .collect()
}

fn iteration_seed(seed: u64, iter: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(iter as u64)
}

fn finish(
    method: Method,
    graph: &CameraGraph,
    tangents: Vec<TangentVector>,
    rotations: Vec<RotationMatrix>,
    trace: Vec<IterationRecord>,
    converged: bool,
) -> Result<EstimationResult> {
    let residual = checked_residual(graph, &rotations, trace.len())?;
    let residual_norm = residual_norm_avg(graph, &rotations);
    let (angle, chordal) = match graph.ground_truth() {
        Some(gt) => (
            Some(angle_error(&rotations, gt)?),
            Some(chordal_error(&rotations, gt)?),
        ),
        None => (None, None),
    };
    Ok(EstimationResult {
        method,
        rotations,
        tangents,
        residual,
        residual_norm,
        angle_error: angle,
        chordal_error: chordal,
        iterations: trace.len(),
        converged,
        trace,
        projection_failures: Vec::new(),
        corrected_energies: 0,
    })
}

/// Shared outer loop: `propose` returns a candidate step for the current
/// subproblem together with its (energy, gap) bookkeeping, or `None` when no
/// acceptable step was found.
fn outer_loop<F>(
    method: Method,
    graph: &CameraGraph,
    schedule: &Schedule,
    init: &Init,
    mut propose: F,
) -> Result<EstimationResult>
where
    F: FnMut(usize, &LinearizedSubproblem, &[TangentVector], f64) -> Result<Proposal>,
{
    schedule.validate()?;
    if !graph.is_connected() {
        return Err(Error::Connectivity(
            "estimation needs a connected graph".into(),
        ));
    }
    let cost = build_cost_matrix(graph);
    let mut v = initial_tangents(graph, init)?;
    let mut rot = exp_all(&v);
    let mut e = checked_residual(graph, &rot, 0)?;
    let mut delta = schedule.delta0;
    let mut kappa = schedule.kappa();
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 1..=schedule.maxiter {
        let sub = linearize(&cost, &v, schedule.alpha, delta)?;
        let p = propose(iter, &sub, &v, e)?;
        let mut norm = 0.0;
        let mut accepted = false;
        if let Some((cand, cand_rot, cand_e)) = p.candidate {
            if cand_e <= e {
                norm = update_norm(&cand_rot, &rot);
                v = cand;
                rot = cand_rot;
                e = cand_e;
                accepted = true;
            }
        }
        trace.push(IterationRecord {
            iter,
            residual: e,
            best_energy: p.energy,
            energy_gap: p.gap,
            delta,
            update_norm: norm,
            accepted,
        });
        log::debug!(
            "{method} iter {iter}: residual {e:.3e}, delta {delta:.3e}, accepted {accepted}"
        );
        if e < schedule.epsilon {
            converged = true;
            break;
        }
        if norm < kappa {
            delta /= schedule.tau;
            kappa /= schedule.tau;
        }
    }
    finish(method, graph, v, rot, trace, converged)
}

struct Proposal {
    energy: f64,
    gap: f64,
    candidate: Option<(Vec<TangentVector>, Vec<RotationMatrix>, f64)>,
}

/// Runs the sampled iterative solver.
pub fn run_iqars(graph: &CameraGraph, cfg: &IqarsConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let mut corrected = 0;
    let mut result = outer_loop(
        Method::Iqars,
        graph,
        &cfg.schedule,
        &cfg.init,
        |iter, sub, v, _| {
            let qubo = binarize(sub, cfg.m)?;
            let wrap = |e: Error| Error::Backend {
                iteration: iter,
                source: Box::new(e),
            };
            let mut set = cfg
                .backend
                .sample(&qubo, iteration_seed(cfg.seed, iter))
                .map_err(wrap)?;
            if set.is_empty() {
                return Err(wrap(Error::Protocol("backend returned no samples".into())));
            }
            corrected += set.corrected;
            if let Some(r) = &cfg.refine {
                let refined = refine(&qubo, &set, r.beta, r.k)?;
                set.insert(&qubo, refined.bits);
            }
            let best = set.best().expect("sample set is non-empty");
            let dv = decode_bits(&best.bits, cfg.m, sub.delta)?;
            let cand = step(v, &dv);
            let cand_rot = exp_all(&cand);
            let cand_e = checked_residual(graph, &cand_rot, iter)?;
            Ok(Proposal {
                energy: best.energy,
                gap: set.energy_gap(),
                candidate: Some((cand, cand_rot, cand_e)),
            })
        },
    )?;
    result.corrected_energies = corrected;
    Ok(result)
}

/// Solves `(2Q̂ + λI) Δv = −ĉ` and clamps the result to the box `[−δ, δ]`.
/// When the system is not positive definite, `λ` is increased until it is;
/// the damping actually used is returned alongside the step.
pub fn solve_subproblem_continuous(
    sub: &LinearizedSubproblem,
    lambda: f64,
) -> Result<(DVector<f64>, f64)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "damping must be >= 0, got {lambda}"
        )));
    }
    let dim = sub.dim();
    let scale = sub.q_hat.amax().max(1e-300);
    let mut lam = lambda;
    for _ in 0..200 {
        let system = &sub.q_hat * 2.0 + DMatrix::identity(dim, dim) * lam;
        if let Some(chol) = system.cholesky() {
            let mut dv = chol.solve(&(-&sub.c_hat));
            if dv.iter().all(|x| x.is_finite()) {
                dv.apply(|x| *x = x.clamp(-sub.delta, sub.delta));
                return Ok((dv, lam));
            }
        }
        lam = if lam == 0.0 { scale * 1e-10 } else { lam * 2.0 };
    }
    Err(Error::Numeric(
        "damped system stayed indefinite after increasing the damping".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    #[serde(flatten)]
    pub schedule: Schedule,
    pub lambda0: f64,
    /// Damping adjustments tried per outer iteration.
    pub max_trials: usize,
    pub init: Init,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            lambda0: 1e-3,
            max_trials: 20,
            init: Init::Identity,
        }
    }
}

/// Damped Gauss-Newton baseline on the same linearized subproblems.
pub fn run_lm(graph: &CameraGraph, cfg: &LmConfig) -> Result<EstimationResult> {
    if cfg.max_trials == 0 || !(cfg.lambda0 >= 0.0) {
        return Err(Error::InvalidParameter(
            "LM needs max_trials >= 1 and lambda0 >= 0".into(),
        ));
    }
    let mut lambda = cfg.lambda0;
    outer_loop(
        Method::Lm,
        graph,
        &cfg.schedule,
        &cfg.init,
        |iter, sub, v, e| {
            let mut last = None;
            for _ in 0..cfg.max_trials {
                let (dv, used) = solve_subproblem_continuous(sub, lambda)?;
                let cand = step(v, &dv);
                let cand_rot = exp_all(&cand);
                let cand_e = checked_residual(graph, &cand_rot, iter)?;
                let energy = sub.objective(&dv);
                if cand_e <= e {
                    lambda = used / 2.0;
                    return Ok(Proposal {
                        energy,
                        gap: 0.0,
                        candidate: Some((cand, cand_rot, cand_e)),
                    });
                }
                lambda = used * 2.0;
                last = Some(energy);
            }
            Ok(Proposal {
                energy: last.unwrap_or(0.0),
                gap: 0.0,
                candidate: None,
            })
        },
    )
}

/// One-shot pipeline: samples the basis-activation QUBO once, sums the
/// activated basis matrices per node and projects them onto SO(3). Nodes
/// whose sum cannot be projected fall back to the identity and are listed in
/// `projection_failures`.
pub fn run_direct(
    graph: &CameraGraph,
    backend: &dyn Sampler,
    seed: u64,
) -> Result<EstimationResult> {
    let qubo = build_direct_qubo(graph);
    let set = backend.sample(&qubo, seed).map_err(|e| Error::Backend {
        iteration: 1,
        source: Box::new(e),
    })?;
    let best = set
        .best()
        .ok_or_else(|| Error::Protocol("backend returned no samples".into()))?;
    let (rotations, failures) = project_decoded(&decode_direct(&best.bits, graph.n())?);
    if !failures.is_empty() {
        log::warn!(
            "{} node(s) could not be projected onto SO(3)",
            failures.len()
        );
    }
    let tangents = rotations.iter().map(RotationMatrix::log).collect();
    let trace = vec![IterationRecord {
        iter: 1,
        residual: residual_avg(graph, &rotations),
        best_energy: best.energy,
        energy_gap: set.energy_gap(),
        delta: 0.0,
        update_norm: 0.0,
        accepted: true,
    }];
    let mut result = finish(Method::Direct, graph, tangents, rotations, trace, false)?;
    result.projection_failures = failures;
    result.corrected_energies = set.corrected;
    Ok(result)
}

/// Projects each decoded block, substituting the identity where that fails.
pub fn project_decoded(blocks: &[nalgebra::Matrix3<f64>]) -> (Vec<RotationMatrix>, Vec<usize>) {
    let mut failures = Vec::new();
    let rotations = blocks
        .iter()
        .enumerate()
        .map(|(i, m)| {
            project_to_so3(m).unwrap_or_else(|_| {
                failures.push(i);
                RotationMatrix::identity()
            })
        })
        .collect();
    (rotations, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        build_relative_measurements, corrupt_with_noise, generate_ground_truth, NoiseSpec, Topology,
    };
    use crate::solvers::SaConfig;
    use nalgebra::Matrix3;

    fn clean(n: usize, seed: u64) -> CameraGraph {
        let gt = generate_ground_truth(n, seed).unwrap();
        build_relative_measurements(&gt, &Topology::Complete).unwrap()
    }

    #[test]
    fn unit_quadratic_step_is_clamped() {
        let dim = 6;
        let mut c = DVector::zeros(dim);
        c[0] = -2.0;
        let sub = LinearizedSubproblem {
            q_hat: DMatrix::identity(dim, dim),
            c_hat: c,
            delta: 0.3,
            alpha: 0.0,
            constant: 0.0,
        };
        let (dv, lam) = solve_subproblem_continuous(&sub, 0.0).unwrap();
        assert_eq!(lam, 0.0);
        assert_eq!(dv[0], 0.3);
        assert!(dv.rows(1, 5).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn indefinite_system_raises_damping() {
        let sub = LinearizedSubproblem {
            q_hat: DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0])),
            c_hat: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            delta: 10.0,
            alpha: 0.0,
            constant: 0.0,
        };
        let (dv, lam) = solve_subproblem_continuous(&sub, 0.0).unwrap();
        assert!(lam > 2.0);
        assert!(dv[0] < 0.0);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let g = clean(6, 3);
        let gt = g.ground_truth().unwrap();
        let cfg = IqarsConfig {
            init: Init::Explicit(gt.iter().map(RotationMatrix::log).collect()),
            backend: Backend::Sa(SaConfig {
                reads: 4,
                sweeps: 20,
                ..SaConfig::default()
            }),
            ..IqarsConfig::default()
        };
        let r = run_iqars(&g, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn small_problem_converges_with_exhaustive_backend() {
        let g = clean(3, 5);
        let cfg = IqarsConfig {
            m: 2,
            backend: Backend::Exhaustive,
            ..IqarsConfig::default()
        };
        let r = run_iqars(&g, &cfg).unwrap();
        assert!(r.residual < 1e-6, "{}", r.residual);
        assert!(r.trace.windows(2).all(|w| w[1].residual <= w[0].residual));
        assert!(r.trace.windows(2).all(|w| w[1].delta <= w[0].delta));
        let csv = r.trace_csv().unwrap();
        assert!(csv.starts_with("iter,residual,best_energy,energy_gap,delta,update_norm"));
        assert_eq!(csv.lines().count(), r.iterations + 1);
    }

    #[test]
    fn lm_improves_noisy_start() {
        let g = corrupt_with_noise(
            &clean(8, 1),
            &NoiseSpec {
                sigma: 0.2,
                seed: 4,
            },
        );
        let start = residual_avg(&g, &vec![RotationMatrix::identity(); 8]);
        let r = run_lm(&g, &LmConfig::default()).unwrap();
        assert!(r.residual < start);
        assert!(r.trace.windows(2).all(|w| w[1].residual <= w[0].residual));
    }

    #[test]
    fn zero_blocks_are_reported_as_projection_failures() {
        let (rot, failed) = project_decoded(&[Matrix3::zeros(), Matrix3::identity()]);
        assert_eq!(failed, vec![0]);
        assert_eq!(rot[0], RotationMatrix::identity());
    }

    #[test]
    fn backend_errors_carry_the_iteration() {
        let g = clean(10, 2);
        let cfg = IqarsConfig {
            backend: Backend::Exhaustive,
            ..IqarsConfig::default()
        };
        match run_iqars(&g, &cfg) {
            Err(Error::Backend { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = clean(3, 0);
        let mut cfg = IqarsConfig::default();
        cfg.schedule.tau = 1.0;
        assert!(run_iqars(&g, &cfg).is_err());
        let cfg = IqarsConfig {
            m: 0,
            ..IqarsConfig::default()
        };
        assert!(run_iqars(&g, &cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = IqarsConfig {
            init: Init::Mst,
            refine: Some(RefineConfig::default()),
            ..IqarsConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: IqarsConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
