//! Finite-dimensional generalized Mehler semigroups.
//!
//! `P_t f(x) = ∫ f(e^{tA}x + y) μ_t(dy)` on `R^N` (`N ≤ 3`) for Gaussian and
//! fractional-diffusion Ornstein–Uhlenbeck processes, together with the
//! seminorm estimators and scaling-exponent experiments used to study the
//! smoothing and time-regularity of these semigroups numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod criteria;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod sampler;
pub mod semigroup;
pub mod seminorms;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use linalg::{gram_covariance, mat_exp, SemigroupSpec};
