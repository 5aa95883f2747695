//! Periodic grids, fields and exact Fourier multipliers.

mod fft;
mod field;
mod grid;
pub mod io;
mod multiplier;
mod random;

pub use field::Field;
pub use grid::GridSpec;
pub(crate) use multiplier::product_spectrum;
pub use multiplier::{apply_multiplier, cauchy_transform, dealiased_product, MultiplierSymbol};
pub use random::{random_field, random_real_field};
