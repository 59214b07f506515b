//! Cell-free massive MIMO simulator for network-assisted full-duplex (NAFD),
//! in-band full-duplex and half-duplex operation.
//!
//! The pipeline is topology → large-scale fading → grouping and precoding →
//! closed-form SE (checked against a Monte-Carlo oracle) → power and EE →
//! AP mode selection. [`experiment`] ties the stages together.

pub mod assignment;
pub mod channel;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod performance;
pub mod precoding;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};

pub type Complex = nalgebra::Complex<f64>;
