//! Monte-Carlo laboratory for the Fourier coefficients of Gaussian
//! multiplicative chaos on the circle and on the unit interval.

pub mod error;
pub mod fft;
pub mod fields;
pub mod gmc;
pub mod grid;
pub mod harness;
pub mod integrals;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod toy_model;

pub use error::{GmcError, Result};
pub use grid::{Domain, GridSpec};
