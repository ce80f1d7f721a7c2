//! Exact-plus-numeric engine for real analytic pseudo-hyperkähler metrics of
//! signature (4p,4q) built from unconstrained holomorphic prepotentials on
//! harmonic space Sp₁(ℂ) × ℂ⁴ⁿ.
//!
//! The core calculus is exact: polynomials on Sp₁(ℂ) in reduced form modulo
//! det U = 1 ([`harmonic`]), charged truncated power series in the analytic
//! coordinates z^{±a} ([`jets`]), frame fields and their Lie brackets
//! ([`frames`]), and the five-step recipe prepotential → bridge → frame →
//! integral submanifold → metric ([`pipeline`]). Every differential identity
//! the construction relies on is verified with zero residual in the exact
//! backend; chart integration and metric sampling are floating point.

pub mod algebra;
pub mod cli;
pub mod frames;
pub mod harmonic;
pub mod jets;
pub mod numeric;
pub mod pipeline;
pub mod scalar;

pub use scalar::{Exact, F64c, Scalar};
