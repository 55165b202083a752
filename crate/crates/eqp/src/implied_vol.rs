//! Inverts the Black-Scholes formula: find the volatility that reproduces a
//! given call price.

use crate::bs::bs_price;
use crate::equilibrium::no_arb_bounds;
use crate::error::{Error, Result};
use crate::model::{CallContract, MarketParams};
use crate::numerics::{find_root, RootBracket};

const BRACKET_LO: f64 = 1e-6;
const BRACKET_HI: f64 = 5.0;
const WIDEST_LO: f64 = 1e-9;
const WIDEST_HI: f64 = 50.0;

/// Solves `bs_price(m with σ, c) = price` for σ.
///
/// The price must lie strictly inside the no-arbitrage interval
/// `(max(0, S0 − Ke^{−rT}), S0)`; the bounds themselves correspond to σ = 0
/// and σ = ∞ and are not invertible. The solver brackets the root in
/// `[1e-6, 5]` per year, widening geometrically to `[1e-9, 50]` if needed, and
/// refines to a volatility interval of width 1e-10. Since vega is bounded by
/// `0.4·S0·√T`, the returned σ reproduces the price to within `1e-9·S0` for
/// any expiry up to several centuries.
pub fn implied_vol(m: &MarketParams, c: &CallContract, price: f64) -> Result<f64> {
    if !price.is_finite() {
        return Err(Error::domain(format!("price must be finite, got {price}")));
    }
    let bounds = no_arb_bounds(m, c);
    if price <= bounds.lower || price >= bounds.upper {
        return Err(Error::OutOfBounds {
            price,
            lower: bounds.lower,
            upper: bounds.upper,
        });
    }

    let objective = |sigma: f64| {
        let trial = m.with_sigma(sigma).expect("bracket keeps sigma positive");
        bs_price(&trial, c) - price
    };

    // bs_price is increasing in sigma, so widen downward while the low edge
    // overshoots and upward while the high edge undershoots
    let mut lo = BRACKET_LO;
    while objective(lo) > 0.0 && lo > WIDEST_LO {
        lo = (lo / 10.0).max(WIDEST_LO);
    }
    let mut hi = BRACKET_HI;
    while objective(hi) < 0.0 && hi < WIDEST_HI {
        hi = (hi * 10.0).min(WIDEST_HI);
    }

    find_root(objective, &RootBracket::new(lo, hi, 1e-10, 128)?)
}
