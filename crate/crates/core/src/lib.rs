//! Robust stability certification for discrete-time linear systems with
//! interval matrix uncertainties in feedback with feedforward neural
//! network controllers.
//!
//! The crate assembles semidefinite feasibility/optimization programs that
//! certify local robust stability and produce ellipsoidal inner
//! approximations of the robust region of attraction:
//!
//! - [`interval`]: interval matrices, center/radius split, vertex
//!   enumeration, interval-times-constant products, sampling.
//! - [`network`]: feedforward networks, isolation block matrices,
//!   equilibrium and pre-activation bound propagation, local sector bounds.
//! - [`qc`]: quadratic-constraint abstraction of the stacked activations.
//! - [`sdp`]: solver-agnostic conic programs (affine PSD blocks plus
//!   nonnegative scalars), a Clarabel-backed solver, and independent
//!   eigenvalue verification of solutions.
//! - [`certificates`]: the robust stability certificates (vertex
//!   enumeration and three uncertainty relaxations), trace-minimal
//!   assembly, and certified ellipsoids.
//! - [`validate`]: everything that double-checks the math by independent
//!   means — closed-loop simulation, Lyapunov decrease sampling,
//!   containment checks, and the constructive converters between the
//!   relaxed certificate families.
//! - [`model`]: the on-disk model schema, benchmark system generators
//!   (inverted pendulum, mass-spring-damper chain) and synthetic
//!   controllers.

pub mod certificates;
pub mod interval;
pub mod model;
pub mod network;
pub mod qc;
pub mod sdp;
pub mod validate;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid interval: lower({row},{col}) = {lower} exceeds upper = {upper}")]
    InvalidInterval {
        row: usize,
        col: usize,
        lower: f64,
        upper: f64,
    },

    #[error("{required} free interval entries exceed the enumeration cap {cap} (2^q vertices)")]
    VertexCapExceeded { required: usize, cap: usize },

    #[error("vertex certificate needs {required} vertex pairs, cap is {cap}")]
    VertexPairCapExceeded { required: u64, cap: u64 },

    #[error("degenerate interval [{low}, {high}]: sector bounds need positive width")]
    DegenerateInterval { low: f64, high: f64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("equilibrium shift {shift:.3e} exceeds tolerance {tolerance:.3e}; the network does not plausibly satisfy pi(0)=0")]
    EquilibriumShiftTooLarge { shift: f64, tolerance: f64 },

    #[error("method {method} requires degenerate intervals (zero radius)")]
    WrongMethod { method: String },

    #[error("no complexity formula for method {method}")]
    NoComplexityFormula { method: String },

    #[error("asymmetric matrix passed where a symmetric one is required (max asymmetry {max_asym:.3e})")]
    Asymmetric { max_asym: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("solver returned a claimed-optimal point that fails independent verification: {0}")]
    VerificationFailed(String),

    #[error("time budget of {budget_s} s exceeded during {phase}")]
    BudgetExceeded { budget_s: f64, phase: String },

    #[error("internal contradiction: {0}")]
    InternalContradiction(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
