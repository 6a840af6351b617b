//! Binary-hologram generation with lookup-table phase randomisation.
//!
//! The crate simulates far-field holographic projection: a target amplitude
//! image is phase-randomised, back-propagated to the hologram plane through
//! a unitary 2-D transform and quantised to the modulation levels of a
//! binary display. Time-multiplexed sub-frames average speckle away.
//!
//! Phase factors come from interchangeable [`phase::PhaseSource`]s: a
//! seedable pseudo-random stream, or a finite cyclic lookup table whose
//! cursor runs continuously across sub-frames. The [`experiments`] module
//! sweeps the table length to measure how much error small tables introduce,
//! reproducibly and in parallel.
//!
//! Modules:
//! - [`field`]: complex fields and the unitary transform pair
//! - [`phase`]: phase sources, table file format, prime utilities
//! - [`cgh`]: quantisation, one-step phase retrieval, Gerchberg-Saxton,
//!   packed frame formats
//! - [`metrics`]: scale-invariant amplitude MSE, normalisation, statistics
//! - [`experiments`]: seeded sweep harness and CSV emission
//! - [`cli`]: the `holo` command-line front end

pub mod cgh;
pub mod cli;
mod error;
pub mod experiments;
pub mod field;
pub mod image_io;
pub mod metrics;
pub mod phase;

pub use error::{Error, Result};
