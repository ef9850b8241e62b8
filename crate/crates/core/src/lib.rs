//! Analysis toolkit for quantum-noise randomized stream ciphers (Y-00 and
//! its QNDM / DSR generalizations).
//!
//! The crate is organised bottom-up:
//!
//! - [`constellation`]: PSK signal sets and the keyed map from running keys
//!   and plaintext bits to transmitted phases.
//! - [`quantum_detection`]: exact detection theory in the span of the
//!   coherent signal states (Gram matrices, square-root measurement,
//!   Helstrom bounds, optimality residuals, Holevo information).
//! - [`receivers`]: semiclassical homodyne / heterodyne error and capacity
//!   formulas.
//! - [`security_metrics`]: unicity-distance bounds and the data-locking
//!   efficiency comparison.
//! - [`simulator`]: deterministic Monte Carlo of Alice, Bob and Eve plus the
//!   desk-scale known-plaintext key search.

pub mod constellation;
pub mod error;
pub mod quantum_detection;
pub mod receivers;
pub mod security_metrics;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = nalgebra::Complex<f64>;
