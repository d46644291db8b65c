//! Aging under dichotomous Markov noise, overall-decreasing-life (ODL)
//! checks for life distributions, and a U-statistic test of exponentiality
//! against ODL alternatives with Monte Carlo power and calibration tools.

pub mod calibration;
pub mod dmn;
pub mod error;
pub mod lifedist;
pub mod mc;
pub mod quad;
pub mod stats;
pub mod ustat;

pub use error::{Error, Result};
