//! Homogenized models of high-contrast composite elastic plates.
//!
//! The crate computes effective plate tensors, spectra of the soft inclusion,
//! Zhikov functions, band-gap limit spectra, coupled macro–micro limit
//! resolvents and evolutions, and direct fine-scale three-dimensional
//! reference solutions.

pub mod effective;
pub mod error;
pub mod fem;
pub mod fine;
pub mod geometry;
pub mod inclusion;
pub mod limit;
pub mod macro_plate;
pub mod spectrum;
pub mod tensor;
pub mod zhikov;

pub use error::{Error, Result};
