//! Criterion benchmarks for the GenCol kernels live in `benches/`.
