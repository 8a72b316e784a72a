//! Operator-splitting pricing of European options under Lévy jump-diffusions with
//! normal inverse Gaussian, generalized hyperbolic and Meixner jumps.
//!
//! The jump generator is discretised as a matrix function of finite-difference
//! stencils, so one jump step is a matrix exponential (or a product of banded
//! factors for Meixner) applied to the price vector.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod cos;
pub mod diffusion;
pub mod error;
pub mod gh;
pub mod grid;
pub mod harness;
pub mod matfun;
pub mod meixner;
pub mod model;
pub mod nig;
pub mod special;
pub mod splitting;

pub use error::{Error, Result};
