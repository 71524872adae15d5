//! Simulation of a full-duplex, RIS-assisted cross-media relay link: two
//! devices on different media (sub-6 GHz and mmWave) exchange data through a
//! reflecting surface that modulates each device's carrier.

pub mod alloc;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod link;
pub mod phase;

pub use error::{Error, Result};
