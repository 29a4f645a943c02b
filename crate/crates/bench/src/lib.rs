//! Benchmark-only crate; see `benches/meshes.rs`.
