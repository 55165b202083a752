//! Probability that holding a call to expiry earns a positive return, under the
//! physical (real-world) measure.
//!
//! The closed form multiplies the probabilities of two events: the option
//! finishing in the money (`S_T ≥ K`, probability `Φ(e1)`), and the payoff
//! covering the premium carried at the riskless rate (`S_T ≥ K + C·e^{rT}`,
//! probability `Φ(e2)`). The product treats the two as independent even though
//! the second event contains the first; the Monte Carlo cross-check mirrors the
//! same factorization (see the `oracle` module for the single-event estimator
//! and how the two differ).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{terminal_law, CallContract, MarketParams};
use crate::numerics::{phi, Probability};

/// The probability and its two factors, plus the underlying normal arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityResult {
    /// `Φ(e1)·Φ(e2)`, the probability of a positive return.
    pub p: Probability,
    /// `Φ(e1)`: probability the call is exercised.
    pub n_e1: Probability,
    /// `Φ(e2)`: probability the payoff covers the funded premium.
    pub n_e2: Probability,
    pub e1: f64,
    pub e2: f64,
}

/// `e1 = [ln(S0/K) + (μ − σ²/2)T]/(σ√T)`,
/// `e2 = [ln(S0/(K + C·e^{rT})) + (μ − σ²/2)T]/(σ√T)`, `p = Φ(e1)·Φ(e2)`.
pub fn prob_positive_return(
    m: &MarketParams,
    c: &CallContract,
    premium: f64,
) -> Result<ProbabilityResult> {
    if !premium.is_finite() || premium < 0.0 {
        return Err(Error::domain(format!(
            "premium must be finite and nonnegative, got {premium}"
        )));
    }
    let law = terminal_law(m, c);
    let funded = premium * (m.rate() * c.ttm_years()).exp();
    let e1 = (law.log_mean - c.strike().ln()) / law.log_std;
    let e2 = (law.log_mean - (c.strike() + funded).ln()) / law.log_std;
    let n_e1 = phi(e1);
    let n_e2 = phi(e2);
    Ok(ProbabilityResult {
        p: Probability::new(n_e1 * n_e2)?,
        n_e1: Probability::new(n_e1)?,
        n_e2: Probability::new(n_e2)?,
        e1,
        e2,
    })
}

/// `Φ(e1)`: the physical-measure probability the call finishes in the money.
///
/// This is the ceiling for any achievable probability of positive return.
pub fn exercise_probability(m: &MarketParams, c: &CallContract) -> Probability {
    let law = terminal_law(m, c);
    let e1 = (law.log_mean - c.strike().ln()) / law.log_std;
    Probability::new(phi(e1)).expect("phi output is always a probability")
}
