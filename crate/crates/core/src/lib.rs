//! Risk-based driving warnings for forced lane changes.
//!
//! A relational local dynamic map ([`rldm`]) fuses lane geometry with
//! measured vehicles. The planner probes velocity profiles along the current
//! lane and along blended lane-change paths ([`motion`]), scores every sample
//! with a survival-analysis cost ([`costs`]), selects the cheapest one and
//! turns it into hysteresis-filtered driver advice ([`planner`]). The
//! [`sim`] module replays scenarios through this loop.

pub mod config;
pub mod costs;
pub mod error;
pub mod geo;
pub mod motion;
pub mod planner;
pub mod rldm;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
