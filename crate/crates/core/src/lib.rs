//! Physical reservoir computing with dipole-coupled planar nanomagnet arrays.
//!
//! The array is simulated in the macrospin approximation: every magnet is a
//! single unit moment with perpendicular anisotropy, coupled to every other
//! magnet through its point-dipole field. Two magnets act as inputs and are
//! clamped to ±z; the z components of the remaining magnets, sampled once per
//! input period, are the reservoir state. A ridge-regression readout and a
//! threshold classifier complete the reservoir computer.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod esn;
pub mod experiment;
pub mod magnet;
pub mod readout;
pub mod task;
pub mod vec3;

pub use error::{Error, Result};
