//! Resolvents of one-dimensional few-body systems with pairwise contact
//! interactions: regularized Hamiltonians `H_ε`, the block resolvent formula
//! built on the factorization `V_ε = A*A`, the `ε → 0` limit operators, and
//! numerical audits of the associated norm bounds.

// Negated float comparisons such as `!(x > 0.0)` are used deliberately so
// that NaN inputs are rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bump;
pub mod config;
pub mod error;
pub mod forms;
pub mod greens;
pub mod grid;
pub mod lambda;
pub mod model;
pub mod par;
pub mod quad;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
