//! Criterion benchmarks for the scheme kernels live in `benches/`.
