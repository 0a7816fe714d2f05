//! Benchmarks only; see `benches/kernels.rs` and run `cargo bench -p qutrit-battery-bench`.
