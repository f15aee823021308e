//! Benchmarks only; run with `cargo bench -p vprop-bench`.
