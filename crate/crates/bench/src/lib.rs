//! Criterion benchmarks for the `nvreadout` hot paths; see `benches/`.
