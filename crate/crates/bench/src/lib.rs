//! Benchmark-only crate; the criterion benchmarks live in `benches/`.
