//! Criterion benchmarks for `mpsm`; see `benches/`.
