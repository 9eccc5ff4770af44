//! Criterion benchmarks for `xylab-core`; see `benches/`.
