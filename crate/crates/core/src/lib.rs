//! Numerical laboratory for the moment-map equations of a Hermitian metric on a
//! discretized half-cylinder with Nahm pole boundary data.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! liealg  --> models --> solver --> variational
//!    \          |          ^
//!     \         v          |
//!      +----> holo      ebe/field
//! ```
//!
//! * [`liealg`] builds the exact `sl(n+1)` structure data (Cartan matrix,
//!   Chevalley basis, principal `sl2` triple, Casimir operator).
//! * [`models`] constructs the singular model metrics: the Nahm pole model and
//!   the knot models obtained from the repulsive Toda system.
//! * [`holo`] holds holomorphic data: Higgs fields, the characteristic-polynomial
//!   fibration, divisor extraction from wedge degenerations and canonical frames.
//! * [`field`] is the discrete geometry layer: graded grids, stencils, matrix
//!   exponentials and the `gamma` operator function.
//! * [`ebe`] assembles the moment-map residual, metric adjoints, the
//!   linearization and the algebraic identities as executable checks.
//! * [`solver`] runs the 2D far-field solve, background construction and the
//!   continuity-method solve (plain and knot variants).
//! * [`variational`] evaluates the Donaldson-type functional and the
//!   uniqueness test.
//!
//! Node-level loops are data parallel via `rayon` when the `parallel` feature
//! (default) is enabled; with `--no-default-features` the same loops run
//! sequentially. Results are independent of the worker count: reductions are
//! performed in a fixed order.

pub mod ebe;
pub mod field;
pub mod holo;
pub mod liealg;
pub mod models;
pub mod par;
pub mod solver;
pub mod variational;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An internal cross-check failed (these indicate a bug, not bad input).
    #[error("internal consistency error: {0}")]
    Consistency(String),
    /// An iterative solve did not converge; the final residual is attached.
    #[error("solver error: {msg} (final residual {residual:.3e})")]
    Solver { msg: String, residual: f64 },
    /// A truncated power-series computation could not be decided at the
    /// current truncation order.
    #[error("inconclusive at truncation order {order}: {msg}")]
    Inconclusive { msg: String, order: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
