//! The benchmarks live under `benches/`; run them with `cargo bench`.
