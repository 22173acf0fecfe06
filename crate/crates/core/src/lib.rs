//! Pseudothermal light simulator.
//!
//! Converts a coherent, phase-diffusing laser field into photon-bunched
//! pseudothermal light by propagating it through a chain of asymmetric
//! Mach-Zehnder interferometers, then models photodetection, timestamp
//! correlation and bunching-peak fitting:
//!
//! ```text
//! field -> cascade -> detect -> correlate -> fit
//!                         theory (closed-form predictions, validators)
//! ```
//!
//! All stochastic stages are driven by counter-addressable seeded RNG
//! streams, so a run is reproducible bit-for-bit regardless of the streaming
//! chunk size.

pub mod cascade;
pub mod config;
pub mod correlate;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fit;
pub mod jones;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use jones::{Jones, JonesMatrix};
