//! Logarithmic capacity and log-singular factorizations of circle
//! homeomorphisms.
//!
//! The crate builds, for an orientation-preserving homeomorphism `φ` of the
//! circle (or of `[0, 1]`), a pair of matched address partitions and the
//! piecewise-linear stage maps `hₙ` converging to a homeomorphism `h` with
//! `φ = (φ∘h⁻¹)∘h`. Each stage is checked against a summable budget using
//! per-part closed-form capacity bounds summed over the parts; a bound that
//! holds for the whole union is reported next to it (see
//! [`capacity::union_capacity_bound`]).

// NaN must fail these guards, so `!(a < b)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod addresses;
pub mod capacity;
pub mod decompose;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod homeo;
pub mod logsingular;

pub use error::{Error, Result};
