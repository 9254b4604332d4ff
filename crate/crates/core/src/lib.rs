//! Numerical laboratory for weighted `L²` estimates of the Fourier extension
//! operator against random weights built from unit cells.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod chaining;
pub mod cli;
pub mod cover;
pub mod error;
pub mod extension;
pub mod hermitian;
pub mod mtfunctional;
pub mod output;
pub mod probbounds;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod stats;
pub mod surface;
pub mod tubes;
pub mod weights;

pub use error::{LabError, Result};
pub use scalar::Scalar;

pub type QuadratureRule64 = surface::QuadratureRule<f64>;
pub type QuadratureRule32 = surface::QuadratureRule<f32>;
pub type CellCover64 = cover::CellCover<f64>;
pub type CellCover32 = cover::CellCover<f32>;
pub type Weight64 = weights::Weight<f64>;
pub type Weight32 = weights::Weight<f32>;
pub type GramMatrix64 = extension::GramMatrix<f64>;
pub type GramMatrix32 = extension::GramMatrix<f32>;
pub type HermitianMatrix64 = hermitian::HermitianMatrix<f64>;
pub type MtEstimate64 = mtfunctional::MtEstimate<f64>;
pub type MtEstimate32 = mtfunctional::MtEstimate<f32>;
pub type Tube64 = tubes::Tube<f64>;
pub type MaureyNet64 = chaining::MaureyNet<f64>;
