//! Black-Scholes valuation of a European call.

use serde::Serialize;

use crate::model::{CallContract, MarketParams};
use crate::numerics::phi;

/// The two arguments of the pricing formula; `d2 = d1 − σ√T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BsInputs {
    pub d1: f64,
    pub d2: f64,
}

/// `d1 = [ln(S0/K) + (r + σ²/2)T] / (σ√T)`, `d2 = d1 − σ√T`.
pub fn bs_d1_d2(m: &MarketParams, c: &CallContract) -> BsInputs {
    let t = c.ttm_years();
    let vol_sqrt_t = m.sigma() * t.sqrt();
    let d1 = ((m.s0() / c.strike()).ln() + (m.rate() + 0.5 * m.sigma() * m.sigma()) * t)
        / vol_sqrt_t;
    BsInputs { d1, d2: d1 - vol_sqrt_t }
}

/// Call value `S0·Φ(d1) − K·e^{−rT}·Φ(d2)`.
///
/// Independent of the growth rate μ by construction. The result always lies in
/// the no-arbitrage envelope `[max(0, S0 − Ke^{−rT}), S0]`; that is asserted,
/// never patched up by clamping.
pub fn bs_price(m: &MarketParams, c: &CallContract) -> f64 {
    let BsInputs { d1, d2 } = bs_d1_d2(m, c);
    let discounted_strike = c.strike() * (-m.rate() * c.ttm_years()).exp();
    let price = m.s0() * phi(d1) - discounted_strike * phi(d2);
    debug_assert!(
        price >= (m.s0() - discounted_strike).max(0.0) - 1e-12 && price <= m.s0(),
        "price {price} escaped the no-arbitrage envelope"
    );
    price
}
