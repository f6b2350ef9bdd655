//! Batch driver for the spike-chain pipeline: configuration parsing, table
//! caching, the `solve`/`sweep`/`kernel`/`check` verbs, and artifact I/O.
//! The binary in `main.rs` is a thin argument layer over this library so
//! integration tests can drive the exact same code paths.

pub mod config;
pub mod driver;

pub use config::{GeometryKind, RunConfig};
pub use driver::{cmd_check, cmd_kernel, cmd_solve, cmd_sweep};
