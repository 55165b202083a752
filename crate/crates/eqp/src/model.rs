//! Market state, contract terms, and the lognormal law of the terminal stock price.

use serde::Serialize;

use crate::error::{Error, Result};

/// Day-count conventions accepted for annualizing day-denominated expiries.
pub const DAY_COUNTS: [u32; 4] = [252, 360, 365, 366];

/// Spot, physical drift, volatility, riskless rate, and day-count convention.
///
/// Constructed through [`MarketParams::new`], which rejects non-finite inputs,
/// non-positive spot or volatility, and unknown day counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    s0: f64,
    mu: f64,
    sigma: f64,
    rate: f64,
    day_count: u32,
}

impl MarketParams {
    pub fn new(s0: f64, mu: f64, sigma: f64, rate: f64, day_count: u32) -> Result<Self> {
        if !s0.is_finite() || s0 <= 0.0 {
            return Err(Error::domain(format!("spot must be finite and positive, got {s0}")));
        }
        if !mu.is_finite() {
            return Err(Error::domain(format!("growth rate must be finite, got {mu}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::domain(format!(
                "volatility must be finite and positive, got {sigma}"
            )));
        }
        if !rate.is_finite() {
            return Err(Error::domain(format!("riskless rate must be finite, got {rate}")));
        }
        if !DAY_COUNTS.contains(&day_count) {
            return Err(Error::domain(format!(
                "day count must be one of {DAY_COUNTS:?}, got {day_count}"
            )));
        }
        Ok(Self { s0, mu, sigma, rate, day_count })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn day_count(&self) -> u32 {
        self.day_count
    }

    pub fn with_s0(&self, s0: f64) -> Result<Self> {
        Self::new(s0, self.mu, self.sigma, self.rate, self.day_count)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.s0, mu, self.sigma, self.rate, self.day_count)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.s0, self.mu, sigma, self.rate, self.day_count)
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        Self::new(self.s0, self.mu, self.sigma, rate, self.day_count)
    }
}

/// Strike and time to expiry (in years) of a European call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CallContract {
    strike: f64,
    ttm_years: f64,
}

impl CallContract {
    pub fn new(strike: f64, ttm_years: f64) -> Result<Self> {
        if !strike.is_finite() || strike <= 0.0 {
            return Err(Error::domain(format!(
                "strike must be finite and positive, got {strike}"
            )));
        }
        if !ttm_years.is_finite() || ttm_years <= 0.0 {
            return Err(Error::domain(format!(
                "time to expiry must be finite and positive, got {ttm_years} years"
            )));
        }
        Ok(Self { strike, ttm_years })
    }

    /// Builds a contract whose expiry is given in days under `m`'s day count.
    pub fn from_days(strike: f64, days: f64, m: &MarketParams) -> Result<Self> {
        Self::new(strike, ttm_from_days(days, m.day_count())?)
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn ttm_years(&self) -> f64 {
        self.ttm_years
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(strike, self.ttm_years)
    }
}

/// Converts a day-denominated expiry to years: `days / day_count`.
pub fn ttm_from_days(days: f64, day_count: u32) -> Result<f64> {
    if !days.is_finite() || days <= 0.0 {
        return Err(Error::domain(format!("days to expiry must be positive, got {days}")));
    }
    if day_count == 0 {
        return Err(Error::domain("day count must be positive".to_string()));
    }
    Ok(days / day_count as f64)
}

/// Parameters of the lognormal terminal price: `ln S_T ~ Normal(log_mean, log_std²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalLaw {
    pub log_mean: f64,
    pub log_std: f64,
}

impl TerminalLaw {
    /// Terminal price at standard-normal draw `z`.
    pub fn terminal_price(&self, z: f64) -> f64 {
        (self.log_mean + self.log_std * z).exp()
    }
}

/// Law of the terminal price under the physical measure:
/// `log_mean = ln S0 + (μ − σ²/2)T`, `log_std = σ√T`.
pub fn terminal_law(m: &MarketParams, c: &CallContract) -> TerminalLaw {
    let t = c.ttm_years();
    TerminalLaw {
        log_mean: m.s0().ln() + (m.mu() - 0.5 * m.sigma() * m.sigma()) * t,
        log_std: m.sigma() * t.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> MarketParams {
        MarketParams::new(100.0, 0.05, 0.1, 0.05, 365).unwrap()
    }

    #[test]
    fn ttm_conversion_matches_plain_division() {
        assert_eq!(ttm_from_days(60.0, 365).unwrap(), 60.0 / 365.0);
        assert_eq!(ttm_from_days(60.0, 252).unwrap(), 60.0 / 252.0);
        assert_eq!(ttm_from_days(365.0, 365).unwrap(), 1.0);
        assert!((ttm_from_days(60.0, 365).unwrap() - 0.16438356164383562).abs() < 1e-15);
        assert!((ttm_from_days(60.0, 252).unwrap() - 0.23809523809523808).abs() < 1e-15);
    }

    #[test]
    fn ttm_rejects_nonpositive_days() {
        assert!(ttm_from_days(0.0, 365).is_err());
        assert!(ttm_from_days(-3.0, 365).is_err());
        assert!(ttm_from_days(f64::NAN, 365).is_err());
        assert!(ttm_from_days(10.0, 0).is_err());
    }

    #[test]
    fn market_params_validation() {
        assert!(MarketParams::new(0.0, 0.05, 0.1, 0.05, 365).is_err());
        assert!(MarketParams::new(-1.0, 0.05, 0.1, 0.05, 365).is_err());
        assert!(MarketParams::new(100.0, f64::NAN, 0.1, 0.05, 365).is_err());
        assert!(MarketParams::new(100.0, 0.05, 0.0, 0.05, 365).is_err());
        assert!(MarketParams::new(100.0, 0.05, -0.1, 0.05, 365).is_err());
        assert!(MarketParams::new(100.0, 0.05, 0.1, f64::INFINITY, 365).is_err());
        assert!(MarketParams::new(100.0, 0.05, 0.1, 0.05, 253).is_err());
        // negative and zero drift/rate are legitimate
        assert!(MarketParams::new(100.0, -0.4, 0.1, 0.0, 252).is_ok());
        assert!(MarketParams::new(100.0, 0.0, 0.1, -0.01, 360).is_ok());
    }

    #[test]
    fn contract_validation() {
        assert!(CallContract::new(0.0, 0.25).is_err());
        assert!(CallContract::new(100.0, 0.0).is_err());
        assert!(CallContract::new(100.0, -1.0).is_err());
        assert!(CallContract::new(100.0, f64::NAN).is_err());
        assert!(CallContract::new(100.0, 0.25).is_ok());
    }

    #[test]
    fn law_drift_cancels_at_unit_spot() {
        // s0 = 1 and mu = sigma²/2 leave ln S_T centred at zero
        let m = MarketParams::new(1.0, 0.02, 0.2, 0.05, 365).unwrap();
        let c = CallContract::new(1.0, 0.7).unwrap();
        let law = terminal_law(&m, &c);
        assert!(law.log_mean.abs() < 1e-15);
    }

    #[test]
    fn law_matches_direct_substitution() {
        let m = market();
        let c = CallContract::new(100.0, 0.25).unwrap();
        let law = terminal_law(&m, &c);
        assert!((law.log_mean - (100f64.ln() + 0.01125)).abs() < 1e-14);
        assert!((law.log_std - 0.05).abs() < 1e-16);
    }

    #[test]
    fn log_std_scales_with_sqrt_time() {
        let m = market();
        let one = terminal_law(&m, &CallContract::new(100.0, 0.3).unwrap());
        let two = terminal_law(&m, &CallContract::new(100.0, 0.6).unwrap());
        assert!((two.log_std / one.log_std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn terminal_price_inverts_the_log() {
        let m = market();
        let c = CallContract::new(100.0, 0.25).unwrap();
        let law = terminal_law(&m, &c);
        assert!((law.terminal_price(0.0).ln() - law.log_mean).abs() < 1e-12);
        assert!(law.terminal_price(2.0) > law.terminal_price(-2.0));
    }

    #[test]
    fn law_is_continuous_in_inputs() {
        // finite-difference continuity probe on a small deterministic grid
        let bump = 1e-7;
        for &(s0, mu, sigma, t) in &[
            (50.0, -0.3, 0.05, 0.02),
            (100.0, 0.0, 0.1, 0.25),
            (150.0, 0.2, 0.4, 1.0),
            (80.0, 0.4, 0.9, 2.0),
        ] {
            let base = terminal_law(
                &MarketParams::new(s0, mu, sigma, 0.05, 365).unwrap(),
                &CallContract::new(100.0, t).unwrap(),
            );
            let bumped = terminal_law(
                &MarketParams::new(s0 * (1.0 + bump), mu + bump, sigma * (1.0 + bump), 0.05, 365)
                    .unwrap(),
                &CallContract::new(100.0, t * (1.0 + bump)).unwrap(),
            );
            assert!((bumped.log_mean - base.log_mean).abs() < 1e-5);
            assert!((bumped.log_std - base.log_std).abs() < 1e-5);
        }
    }
}
