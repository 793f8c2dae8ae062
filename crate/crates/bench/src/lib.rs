//! Criterion benchmarks for `bottleneck-core`; see `benches/`.
