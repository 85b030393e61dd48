//! Criterion benchmarks for the topic modeling stages; see `benches/`.
