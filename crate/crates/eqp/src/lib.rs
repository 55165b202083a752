//! Physical-measure analysis of European call options under geometric
//! Brownian motion: the probability that a bought call ends with a positive
//! return, the premium that pins that probability to a target level, and the
//! supporting Black-Scholes, implied-volatility, Monte Carlo, and parameter
//! sweep machinery.

pub mod bs;
pub mod equilibrium;
pub mod error;
pub mod implied_vol;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod physical;
pub mod sweep;

pub use error::{Error, Result};
