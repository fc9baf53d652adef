//! Criterion benchmarks for the clustering kernels; see `benches/`.
