//! Desk-scale verification of spectral, growth and frequency estimates for
//! holomorphic functions and forms on closed-form gradient Kähler Ricci
//! shrinkers.
//!
//! The model catalog is the Gaussian soliton on `C^m`, the cylinder
//! `CP^1 x C` and finite products of these. Every model is, metrically,
//! `(S^2)^s x C^k` with `f = s + |w|^2 / 4`, so level sets of `b = 2 sqrt(f)`
//! are products of round spheres and all integrals reduce to moments of
//! polynomials on Euclidean spheres.

// Negated comparisons reject NaN along with out-of-range values; matrix
// kernels index several arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod exact;
pub mod forms;
pub mod frequency;
pub mod heat;
pub mod linalg;
pub mod model;
mod parse;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod spectrum;
pub mod verify;

pub use error::{LabError, Result};
pub use forms::HoloForm;
pub use frequency::{FrequencyConfig, FrequencyProfile, Route};
pub use model::{ModelKind, ModelShrinker, Point};
pub use poly::HoloPoly;
pub use spectrum::{SpectralLine, SpectrumCatalog};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
