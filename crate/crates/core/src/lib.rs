//! Spectral laboratory for complex geometrical optics (CGO) solutions of
//! `Δu = qu`, the Bourgain-type spaces they are estimated in, and Monte-Carlo
//! verification of the averaged estimates used to select the phase.

pub mod cgo;
pub mod error;
pub mod phase;
pub mod recovery;
pub mod spaces;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::{Field, PeriodicGrid, SpectralField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
