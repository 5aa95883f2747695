//! Numerical laboratory for quadratic compensated-compactness quantities.
//!
//! The grid layers (`spectral`, `norms`, `quantities`, `operators`,
//! `variational`) are generic over [`Scalar`] (`f32` or `f64`). Dense
//! eigensolves, the half-plane factorization and the finite-dimensional
//! models work in `f64`.

pub mod error;
pub mod corpus;
pub mod factorization;
pub mod findim;
pub mod scalar;
pub mod norms;
pub mod operators;
pub mod quantities;
pub mod spectral;
pub mod variational;

pub use error::{LabError, Result};
pub use scalar::Scalar;
pub use spectral::{Field, GridSpec, MultiplierSymbol};

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
