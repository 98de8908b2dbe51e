//! Criterion benchmarks for the solvers and geometry.
