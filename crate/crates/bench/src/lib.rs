//! Criterion benchmarks for the solver backends and the subproblem pipeline.
//! Run with `cargo bench -p qmra-bench`.
