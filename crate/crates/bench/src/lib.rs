//! Criterion benchmarks for the observer pipeline; see `benches/`.
