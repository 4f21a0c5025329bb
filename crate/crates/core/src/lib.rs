//! Broadband coherent diffraction imaging: FFT transfer operators between
//! wavelengths, recovery of a monochromatic pattern from a broadband one,
//! and iterative phase retrieval.

mod error;
pub mod grid;
pub mod io;
pub mod retrieval;
pub mod sim;
pub mod solver;
pub mod spectrum;
pub mod transfer;

pub use error::{Error, Result};
