use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use qmra_core::graph::{load_graph, residual_avg, save_graph, synthetic_graph, SyntheticSpec};
use qmra_core::iqars::{run_direct, run_iqars, run_lm, EstimationResult};
use qmra_core::qubo::{
    binarize, build_cost_matrix, coupling_sparsity_stats, linearize, logical_qubit_count,
    random_qubo, BinaryQubo,
};
use qmra_core::refine::{refinement_benchmark, refinement_csv};
use qmra_core::so3::TangentVector;
use qmra_core::CameraGraph;

use crate::config::merge_with_file;
use crate::error::{CliError, CliResult};
use crate::manifest::{now_ms, write_text, RunManifest};
use crate::options::{
    sibling, BackendArg, BenchmarkOptions, GenerateOptions, MethodArg, RefineOptions, SolveOptions,
    SolverOptions, StatsOptions,
};

fn required<T: Clone>(value: &Option<T>, flag: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

pub fn generate(flags: &GenerateOptions, config: Option<&Path>) -> CliResult<()> {
    let o = merge_with_file(flags, config)?;
    let spec = SyntheticSpec {
        n: required(&o.n, "n")?,
        sigma: o.sigma.unwrap_or(0.0),
        keep_ratio: o.sparsity.unwrap_or(1.0),
        seed: o.seed.unwrap_or(0),
    };
    let out = required(&o.out, "out")?;
    let graph = synthetic_graph(&spec)?;
    save_graph(&graph, &out)?;
    let gt = graph
        .ground_truth()
        .expect("synthetic graphs carry ground truth");
    println!(
        "wrote {}: n={} measurements={} ground-truth residual={:.6e}",
        out.display(),
        graph.n(),
        graph.edges().len(),
        residual_avg(&graph, gt)
    );
    Ok(())
}

fn estimate(
    graph: &CameraGraph,
    method: MethodArg,
    solver: &SolverOptions,
    seed: u64,
) -> CliResult<EstimationResult> {
    Ok(match method {
        MethodArg::Iqars => run_iqars(graph, &solver.iqars(seed)?)?,
        MethodArg::Lm => run_lm(graph, &solver.lm()?)?,
        MethodArg::Direct => run_direct(graph, &solver.backend(seed)?, seed)?,
    })
}

pub fn solve(flags: &SolveOptions, config: Option<&Path>) -> CliResult<()> {
    let started = now_ms();
    let mut o = merge_with_file(flags, config)?;
    o.fill_defaults();
    let graph_path = required(&o.graph, "graph")?;
    let graph = load_graph(&graph_path)?;
    let seed = o.seed.expect("filled");
    let method = o.method.expect("filled");
    let result = estimate(&graph, method, &o.solver, seed)?;

    let out = o.out.clone().expect("filled");
    let trace_out = o.trace_out.clone().expect("filled");
    let manifest_out = o.manifest_out.clone().expect("filled");
    write_text(&out, &result.to_json())?;
    write_text(&trace_out, &result.trace_csv()?)?;

    let mut manifest = RunManifest::new("solve", &o, started);
    manifest.seeds = vec![seed];
    manifest.inputs = vec![graph_path];
    manifest.outputs = vec![out.clone(), trace_out];
    manifest.write(&manifest_out)?;

    print!(
        "{method:?} residual={:.6e} iterations={} converged={}",
        result.residual, result.iterations, result.converged
    );
    if let (Some(a), Some(c)) = (result.angle_error, result.chordal_error) {
        print!(" angle_error={a:.6e} chordal_error={c:.6e}");
    }
    println!();
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchRow {
    sigma: f64,
    seed: u64,
    method: MethodArg,
    residual: Option<f64>,
    residual_norm: Option<f64>,
    chordal_error: Option<f64>,
    angle_error: Option<f64>,
    iters: Option<usize>,
    wall_ms: u128,
    status: String,
}

pub fn benchmark(flags: &BenchmarkOptions, config: Option<&Path>) -> CliResult<()> {
    let started = now_ms();
    let mut o = merge_with_file(flags, config)?;
    o.solver.fill_defaults();
    let n = *o.n.get_or_insert(20);
    let sigmas = required(&o.sigmas, "sigmas")?;
    if sigmas.is_empty() {
        return Err(CliError::Usage("the sigma grid is empty".into()));
    }
    let seeds = *o.seeds.get_or_insert(10);
    let first = *o.first_seed.get_or_insert(0);
    let methods = o
        .methods
        .get_or_insert_with(|| vec![MethodArg::Iqars, MethodArg::Lm, MethodArg::Direct])
        .clone();
    if seeds == 0 || methods.is_empty() {
        return Err(CliError::Usage(
            "need at least one seed and one method".into(),
        ));
    }
    let keep_ratio = *o.keep_ratio.get_or_insert(1.0);
    let out = o
        .out
        .get_or_insert_with(|| PathBuf::from("benchmark.csv"))
        .clone();
    let manifest_out = o
        .manifest_out
        .get_or_insert_with(|| sibling(&out, "manifest.json"))
        .clone();
    let jobs = o
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut cells: Vec<(f64, u64, MethodArg)> = Vec::new();
    for &sigma in &sigmas {
        for seed in first..first + seeds {
            for &m in &methods {
                cells.push((sigma, seed, m));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let solver = &o.solver;
    let rows: Vec<BenchRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(sigma, seed, method)| {
                let t = Instant::now();
                let spec = SyntheticSpec {
                    n,
                    sigma,
                    keep_ratio,
                    seed,
                };
                let outcome = synthetic_graph(&spec)
                    .map_err(CliError::from)
                    .and_then(|g| estimate(&g, method, solver, seed));
                let wall_ms = t.elapsed().as_millis();
                match outcome {
                    Ok(r) => BenchRow {
                        sigma,
                        seed,
                        method,
                        residual: Some(r.residual),
                        residual_norm: Some(r.residual_norm),
                        chordal_error: r.chordal_error,
                        angle_error: r.angle_error,
                        iters: Some(r.iterations),
                        wall_ms,
                        status: "ok".into(),
                    },
                    Err(e) => {
                        log::warn!("cell sigma={sigma} seed={seed} {method:?} failed: {e}");
                        BenchRow {
                            sigma,
                            seed,
                            method,
                            residual: None,
                            residual_norm: None,
                            chordal_error: None,
                            angle_error: None,
                            iters: None,
                            wall_ms,
                            status: e.to_string(),
                        }
                    }
                }
            })
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    write_text(&out, &String::from_utf8(bytes).expect("csv is utf-8"))?;

    let mut manifest = RunManifest::new("benchmark", &o, started);
    manifest.seeds = (first..first + seeds).collect();
    manifest.outputs = vec![out.clone()];
    manifest.write(&manifest_out)?;

    for &sigma in &sigmas {
        for m in o.methods.as_deref().unwrap_or_default() {
            let ok: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.sigma == sigma && r.method == *m && r.status == "ok")
                .collect();
            if ok.is_empty() {
                continue;
            }
            let mean = |f: fn(&BenchRow) -> Option<f64>| {
                ok.iter().filter_map(|r| f(r)).sum::<f64>() / ok.len() as f64
            };
            println!(
                "sigma={sigma:.4} {m:?}: residual={:.4e} chordal_error={:.4} ({} ok)",
                mean(|r| r.residual),
                mean(|r| r.chordal_error),
                ok.len()
            );
        }
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{failed} benchmark cell(s) failed; see the status column");
    }
    Ok(())
}

/// QUBO of the first iteration from the identity start.
fn first_iteration_qubo(
    graph: &CameraGraph,
    m: usize,
    alpha: f64,
    delta0: f64,
) -> CliResult<BinaryQubo> {
    let cost = build_cost_matrix(graph);
    let sub = linearize(
        &cost,
        &vec![TangentVector::zero(); graph.n()],
        alpha,
        delta0,
    )?;
    Ok(binarize(&sub, m)?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn refine(flags: &RefineOptions, config: Option<&Path>) -> CliResult<()> {
    let o = merge_with_file(flags, config)?;
    let qubo = match &o.graph {
        Some(path) => {
            let graph = load_graph(path)?;
            first_iteration_qubo(&graph, o.m.unwrap_or(1), 0.5, std::f64::consts::PI / 30.0)?
        }
        None => random_qubo(o.bits.unwrap_or(12), o.instance_seed.unwrap_or(0)),
    };
    let sampler = SolverOptions {
        backend: Some(o.backend.unwrap_or(BackendArg::Boltzmann)),
        reads: o.reads,
        sampler_beta: o.sampler_beta,
        ..SolverOptions::default()
    }
    .backend(o.seed.unwrap_or(0))?;
    let grid = o
        .k_grid
        .clone()
        .unwrap_or_else(|| vec![o.topk.unwrap_or(30)]);
    if grid.is_empty() || grid.contains(&0) {
        return Err(CliError::Usage("K values must be >= 1".into()));
    }
    let stats = refinement_benchmark(
        &qubo,
        &sampler,
        o.beta.unwrap_or(2.0),
        &grid,
        o.trials.unwrap_or(200),
        o.seed.unwrap_or(0),
    )?;
    emit(o.out.as_deref(), &refinement_csv(&stats)?)
}

pub fn stats(flags: &StatsOptions, config: Option<&Path>) -> CliResult<()> {
    let o = merge_with_file(flags, config)?;
    let graph = load_graph(required(&o.graph, "graph")?)?;
    let m = o.m.unwrap_or(3);
    let qubo = first_iteration_qubo(
        &graph,
        m,
        o.alpha.unwrap_or(0.5),
        o.delta0.unwrap_or(std::f64::consts::PI / 30.0),
    )?;
    let s = coupling_sparsity_stats(&qubo);
    emit(
        o.out.as_deref(),
        &s.to_csv(Some(logical_qubit_count(graph.n(), m))),
    )
}
