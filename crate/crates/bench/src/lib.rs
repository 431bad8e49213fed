//! Criterion benchmarks for the hot paths of `affordance-core`; see `benches/`.
