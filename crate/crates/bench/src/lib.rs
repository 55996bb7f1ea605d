//! Criterion benchmarks for bundle-audit; see `benches/`.
