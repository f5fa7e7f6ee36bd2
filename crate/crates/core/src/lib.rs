//! Gaussian-optics model of direct, phase-lock-free detection of bright EPR
//! beams from a non-degenerate optical parametric amplifier.
//!
//! The crate is `no_std` (it needs `alloc`). The command line and file formats
//! live in the `eprsim` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod gaussian;
pub mod criteria;
pub mod detection;
pub mod optics;
pub mod scenario;
pub mod oracle;

pub use error::{Error, Result};
