//! Criterion benchmarks for `nsqkd-core`; see `benches/`.
