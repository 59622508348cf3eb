//! Hybridized summation-by-parts finite differences for second-order
//! elliptic problems on curvilinear multi-block meshes.
//!
//! Each block is solved locally given trace values on its faces; the traces
//! are coupled globally. The monolithic system and both Schur complements
//! are symmetric positive definite when the penalties respect the bound
//! derived from the borrowing lemma.

pub mod error;
pub mod export;
pub mod geometry;
pub mod global;
pub mod local;
pub mod mesh;
pub mod sbp1d;
pub mod sbp2d;
pub mod scalar;
pub mod solve;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};

/// Operators in double precision; the type every 2D module uses.
pub type Sbp1d = sbp1d::SbpOperators1D<f64>;
pub type Sbp1dF32 = sbp1d::SbpOperators1D<f32>;
pub type Sbp1dExact = sbp1d::SbpOperators1D<Exact>;
