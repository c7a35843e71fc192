//! Companion crate that hosts the criterion benchmarks; see `benches/`.
