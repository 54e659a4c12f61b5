//! Criterion benchmarks for `mpngame`; see `benches/solve.rs`.
