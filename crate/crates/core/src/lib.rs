//! Multiple rotation averaging on SO(3) through a sequence of binary
//! quadratic subproblems.

pub mod error;
pub mod graph;
pub mod iqars;
pub mod qubo;
pub mod refine;
pub mod so3;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::{
    angle_error, chordal_error, load_graph, mst_initialization, residual_avg, residual_norm_avg,
    save_graph, synthetic_graph, CameraGraph, Edge, SyntheticSpec,
};
pub use iqars::{
    run_direct, run_iqars, run_lm, solve_subproblem_continuous, EstimationResult, Init,
    IqarsConfig, IterationRecord, LmConfig, Method, Schedule,
};
pub use qubo::{BinaryQubo, LinearizedSubproblem};
pub use refine::{refine, RefineConfig, RefinementResult};
pub use so3::{RotationMatrix, TangentVector};
pub use solvers::{Backend, Sample, SampleSet, Sampler};
