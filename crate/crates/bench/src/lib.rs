//! Criterion benchmarks for `welfarist-core`; see `benches/`.
