//! Numerical construction of boundary spike chains balanced by the curvature
//! of a boundary segment.
//!
//! The pipeline, in dependency order:
//!
//! 1. [`ground_state`] solves the radial profile `w` of `Δw - w + w^p = 0` on
//!    the plane by shooting on `w(0)`.
//! 2. [`interaction`] integrates the pairwise spike interaction `Ψ(s)`, the
//!    curvature coupling constant `ν₂`, and tabulates the inverse map `G` of
//!    the normalized interaction `Ψ₁ = Ψ/ν₂`.
//! 3. [`geometry`] models the segment curvature `H(γ(s))` and certifies the
//!    convexity/endpoint assumptions the construction needs.
//! 4. [`continuum`] solves the continuum-limit system for `(x(t), ρ(t))` by
//!    backward shooting with a single scalar unknown.
//! 5. [`discrete`] samples the trajectory at interval midpoints and solves the
//!    reduced nonlinear balance system for the spike positions exactly.
//! 6. [`verifier`] ties each quantitative claim of the construction to a
//!    measurable check over a sweep of the small parameter.
//!
//! Everything is deterministic: no randomness, no thread-order dependence.
//! All value types are immutable after construction and safe to share.

// Validation guards are written `!(x > y)` so NaN parameters are rejected
// along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod dd;
pub mod discrete;
pub mod geometry;
pub mod ground_state;
pub mod interaction;
pub mod interp;
pub mod ode;
pub mod quad;
pub mod verifier;

pub use continuum::{shoot, ContinuumError, ContinuumSolution};
pub use discrete::{
    initial_configuration, solve_corrections, SolveError, SolverPath, SpikeConfiguration,
};
pub use geometry::{validate_h1, CurvatureModel, GeometryError, H1Report};
pub use ground_state::{solve_ground_state, GroundStateError, GroundStateProfile};
pub use interaction::{
    build_kernel, compute_nu2, compute_psi, InteractionError, InteractionKernel, KernelConfig,
};
pub use verifier::{run_sweep, CheckRecord, SweepConfig, VerificationReport};
