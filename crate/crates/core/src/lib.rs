//! Discrete spectral calculus for Dirichlet Laplacians on lattice domains:
//! Littlewood-Paley blocks, Besov norms, multiplier bounds and fractional
//! heat semigroups.

// `!(x > 0.0)` style guards are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod ensemble;
pub mod error;
pub mod exponent;
pub mod fit;
pub mod grid;
pub mod interpolation;
pub mod multiplier;
pub mod partition;
pub mod quadrature;
pub mod report;
pub mod semigroup;
pub mod spectral;
pub mod suite;

pub use error::{Error, Result};
