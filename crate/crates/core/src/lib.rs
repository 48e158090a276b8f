//! Pseudo-spectral simplified Bardina solver with nudging data assimilation
//! and recursive recovery of the filter length `alpha` from low-mode data.

pub mod error;
pub mod harness;
pub mod model;
pub mod nudging;
pub mod recovery;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{GridSpec, SpectralField};
