//! Numerical laboratory for the semilinear heat equation
//! `u_t - Δ_X u = |u|^p + f(x)` with sums-of-squares operators
//! `Δ_X = Σ (X_k² + (div X_k) X_k)` built from smooth vector fields,
//! including degenerate (Grushin- and Engel-type) systems.
//!
//! The crate provides:
//! - a small closed expression algebra for vector-field coefficients
//!   ([`expr`], [`fields`]),
//! - finite-difference assembly of `Δ_X` on truncated boxes ([`grid`],
//!   [`operator`]) and its heat semigroup with kernel diagnostics
//!   ([`semigroup`]),
//! - mild solutions by Picard iteration on the Duhamel formula ([`mild`])
//!   and an adaptive IMEX method-of-lines solver with blow-up detection
//!   ([`lines`]),
//! - cutoff test functions, the nonexistence functionals and their
//!   scaling laws, and the closed-form critical exponents ([`cutoff`],
//!   [`functionals`]).
//!
//! The `parallel` feature (on by default) runs quadrature cells, stencil
//! application, and grid sampling on a rayon pool; all reductions use a
//! fixed pairwise tree so results are identical with and without it.

pub mod cutoff;
pub mod error;
pub mod expr;
pub mod fields;
pub mod fit;
pub mod functionals;
pub mod grid;
pub mod lines;
pub mod mild;
pub mod operator;
pub mod par;
pub mod quad;
pub mod semigroup;

pub use error::{CoreError, Result};
