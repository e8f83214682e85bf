//! Antenna coding for pixel antennas: multiport network model, beamspace
//! channels, SEBO and codebook optimisation, MIMO capacity and SVD-based
//! analysis, plus a Monte Carlo experiment harness.

pub mod analysis;
pub mod antenna_model;
pub mod beamspace;
pub mod codebook;
pub mod error;
pub mod gain;
pub mod harness;
pub mod linalg;
pub mod mimo_capacity;
pub mod sebo;

pub use error::{Error, Result, Side};
