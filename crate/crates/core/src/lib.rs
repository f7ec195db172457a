//! Primal-dual first-order methods for `min F(x)` subject to `K x = b`,
//! with `F` smooth and strongly convex.
//!
//! Module map:
//! - [`operators`]: dense `K` and a counting wrapper for `K`, `K^T`
//! - [`problem`]: objectives, the affine constraint, KKT residuals and a direct KKT oracle
//! - [`spectral`]: eigendecomposition of `W = K^T K`, spectral bounds, Chebyshev polynomials
//! - [`chebyshev`]: the Chebyshev iteration used as a polynomial preconditioner
//! - [`solvers`]: PAPC, its accelerated variant, and the optimal method
//! - [`diagnostics`]: metrics, Lyapunov functions, rate certificates, traces
//! - [`experiments`]: instance generators and the comparison harness

// Negated float comparisons route NaN to the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebyshev;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod operators;
pub mod problem;
pub mod solvers;
pub mod spectral;
pub mod vecops;

pub use error::{Error, Result};
