//! Total-variation denoising on graphs.
//!
//! The crate builds graph families and their incidence matrices
//! ([`graphs`]), computes the spectral constants that govern the denoiser's
//! theoretical tuning ([`spectral`]), solves and certifies the denoising
//! problem ([`tvsolver`]), provides a Haar-thresholding baseline
//! ([`haar`]), generates ground-truth signals ([`signals`]) and runs seeded
//! Monte Carlo studies ([`experiments`]).

pub mod error;
pub mod graphs;
pub mod spectral;
pub mod tvsolver;
pub mod haar;
pub mod signals;
pub mod experiments;

pub use error::{Error, Result};
