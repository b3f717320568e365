//! Criterion benchmarks for the groundcast models; see `benches/models.rs`.
