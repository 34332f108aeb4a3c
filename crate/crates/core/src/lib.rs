//! Witten-deformed heat kernels: symbolic parametrix, path actions,
//! one-dimensional spectra and index integrals.

pub mod action;
pub mod calculus;
pub mod error;
pub mod exterior;
pub mod gauss;
pub mod numerics;
pub(crate) mod par;
pub mod parametrix;
pub mod parse;
pub mod poly;
pub mod potential;
pub mod quad;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
