use thiserror::Error;

/// Unified error type for the whole crate.
///
/// `Domain` covers violated input preconditions, `Bracket` and `Convergence`
/// come out of the root finder, `OutOfBounds` flags option prices that no
/// volatility can reach, and `Config` flags malformed grids or empty inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),

    #[error("bracket [{lo}, {hi}] does not straddle a root: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no convergence after {iterations} iterations on [{lo}, {hi}]")]
    Convergence { iterations: u32, lo: f64, hi: f64 },

    #[error("price {price} lies outside the open no-arbitrage interval ({lower}, {upper})")]
    OutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
