//! Optimal contribution selection for breeding populations.
//!
//! Maximises the genetic gain `gᵀx` over contributions `x` subject to
//! `eᵀx = 1`, bounds `l ≤ x ≤ u` and a group-coancestry cap `xᵀAx/2 ≤ θ`,
//! where `A` is the numerator relationship matrix of a pedigree. The cap is
//! written as a second-order cone in one of three equivalent ways and solved
//! with a primal-dual interior-point method.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod factorization;
pub mod formulation;
pub mod kinship;
pub mod pedigree;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
