//! Low-rank approximation of affine-parametric diffusion problems.
//!
//! The solution `u(y)` of `(Ā - Σ y_i A_i) u(y) = f` for `y ∈ [-1,1]^d` is
//! computed as a factored pair `V Φᵀ` in a tensor Legendre basis by a
//! fixed-point iteration with SVD recompression in the energy metric.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait, clippy::wrong_self_convention)]

pub mod error;
pub mod fem;
pub mod legendre;
pub mod lowrank;
pub mod mesh;
pub mod neumann;
pub mod oned;
pub mod skeleton;

pub use error::{Error, Result};
