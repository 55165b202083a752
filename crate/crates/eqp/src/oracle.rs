//! Monte Carlo estimators under the lognormal terminal law: brute-force
//! cross-checks for the closed forms elsewhere in the crate.
//!
//! The probability-of-positive-return estimator mirrors the closed form's
//! factorization: it multiplies the sampled frequencies of the exercise event
//! `S_T ≥ K` and the coverage event `S_T ≥ K + C·e^{rT}`. The coverage event
//! implies the exercise event, so this product is a different quantity from
//! the frequency of the single event `(S_T − K)⁺ ≥ C·e^{rT}` (which equals the
//! coverage frequency alone whenever C > 0, and 1 when C = 0).
//! [`mc_prob_payoff_covers_premium`] estimates that single event for anyone who
//! wants the unfactored probability; the two coincide only when exercise is
//! all but certain.
//!
//! Path generation is partitioned into fixed 2^16-path batches, each drawing
//! from its own counter-derived generator substream, so estimates are
//! bit-identical for a given seed regardless of how many workers run batches.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bs::bs_price;
use crate::error::{Error, Result};
use crate::model::{terminal_law, CallContract, MarketParams, TerminalLaw};
use crate::numerics::phi_inv;
use crate::physical::prob_positive_return;

/// Paths per generator substream.
const BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(paths: u64, seed: u64, antithetic: bool) -> Result<Self> {
        if paths == 0 {
            return Err(Error::domain("path count must be positive".to_string()));
        }
        Ok(Self { paths, seed, antithetic })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: u64,
}

/// Open-interval uniform: `(k + 1/2)/2^53` over the top 53 bits, never 0 or 1.
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

fn n_batches(paths: u64) -> u64 {
    paths.div_ceil(BATCH)
}

/// Feeds every standard-normal draw of one batch to `visit`, in path order.
///
/// Antithetic pairing is by global path index (path 2j and 2j+1 share the j-th
/// uniform with opposite signs); the batch size is even, so pairs never
/// straddle substreams.
fn for_each_z(cfg: &McConfig, batch: u64, mut visit: impl FnMut(f64)) {
    let lo = batch * BATCH;
    let hi = ((batch + 1) * BATCH).min(cfg.paths);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(batch);
    if cfg.antithetic {
        let mut i = lo;
        while i < hi {
            let z = phi_inv(uniform_open(&mut rng));
            visit(z);
            if i + 1 < hi {
                visit(-z);
            }
            i += 2;
        }
    } else {
        for _ in lo..hi {
            visit(phi_inv(uniform_open(&mut rng)));
        }
    }
}

fn count_events(law: &TerminalLaw, exercise_at: f64, cover_at: f64, cfg: &McConfig) -> (u64, u64) {
    (0..n_batches(cfg.paths))
        .into_par_iter()
        .map(|batch| {
            let mut exercised = 0u64;
            let mut covered = 0u64;
            for_each_z(cfg, batch, |z| {
                let s = law.terminal_price(z);
                exercised += (s >= exercise_at) as u64;
                covered += (s >= cover_at) as u64;
            });
            (exercised, covered)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Estimates `Φ(e1)·Φ(e2)` as the product of the exercise and coverage
/// frequencies over one path set.
///
/// The standard error is the delta-method error of that product, using the
/// sampled covariance of the two (nested) indicators.
pub fn mc_prob_positive_return(
    m: &MarketParams,
    c: &CallContract,
    premium: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if !premium.is_finite() || premium < 0.0 {
        return Err(Error::domain(format!(
            "premium must be finite and nonnegative, got {premium}"
        )));
    }
    let law = terminal_law(m, c);
    let funded = premium * (m.rate() * c.ttm_years()).exp();
    let (exercised, covered) = count_events(&law, c.strike(), c.strike() + funded, cfg);
    let n = cfg.paths as f64;
    let p1 = exercised as f64 / n;
    let p2 = covered as f64 / n;
    let mean = p1 * p2;
    // coverage implies exercise, so Cov(1A, 1B) = p2(1 − p1)
    let var = p2 * p2 * p1 * (1.0 - p1)
        + p1 * p1 * p2 * (1.0 - p2)
        + 2.0 * p1 * p2 * p2 * (1.0 - p1);
    Ok(McEstimate {
        mean,
        std_error: (var.max(0.0) / n).sqrt(),
        paths: cfg.paths,
    })
}

/// Estimates the single-event probability `Pr{(S_T − K)⁺ ≥ C·e^{rT}}` with a
/// plain indicator mean and binomial standard error.
///
/// For C = 0 the event always holds (a worthless expiry still covers a free
/// option), so the estimate is exactly 1; contrast with the factored form.
pub fn mc_prob_payoff_covers_premium(
    m: &MarketParams,
    c: &CallContract,
    premium: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if !premium.is_finite() || premium < 0.0 {
        return Err(Error::domain(format!(
            "premium must be finite and nonnegative, got {premium}"
        )));
    }
    let law = terminal_law(m, c);
    let funded = premium * (m.rate() * c.ttm_years()).exp();
    let strike = c.strike();
    let hits = (0..n_batches(cfg.paths))
        .into_par_iter()
        .map(|batch| {
            let mut hits = 0u64;
            for_each_z(cfg, batch, |z| {
                let payoff = (law.terminal_price(z) - strike).max(0.0);
                hits += (payoff >= funded) as u64;
            });
            hits
        })
        .sum::<u64>();
    let n = cfg.paths as f64;
    let mean = hits as f64 / n;
    Ok(McEstimate {
        mean,
        std_error: (mean * (1.0 - mean) / n).sqrt(),
        paths: cfg.paths,
    })
}

/// Prices the call by simulation under the risk-neutral drift (μ replaced by
/// r) and discounts the average payoff; standard error is the sample error of
/// the discounted payoffs.
pub fn mc_bs_price(m: &MarketParams, c: &CallContract, cfg: &McConfig) -> Result<McEstimate> {
    let t = c.ttm_years();
    let law = TerminalLaw {
        log_mean: m.s0().ln() + (m.rate() - 0.5 * m.sigma() * m.sigma()) * t,
        log_std: m.sigma() * t.sqrt(),
    };
    let discount = (-m.rate() * t).exp();
    let strike = c.strike();
    let partials: Vec<(f64, f64)> = (0..n_batches(cfg.paths))
        .into_par_iter()
        .map(|batch| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for_each_z(cfg, batch, |z| {
                let payoff = discount * (law.terminal_price(z) - strike).max(0.0);
                sum += payoff;
                sum_sq += payoff * payoff;
            });
            (sum, sum_sq)
        })
        .collect();
    // merge in batch order so the floating-point total is schedule-independent
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = cfg.paths as f64;
    let mean = sum / n;
    let sample_var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (sample_var / n).sqrt(),
        paths: cfg.paths,
    })
}

/// One randomized closed-form-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteCase {
    pub index: u32,
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub rate: f64,
    pub strike: f64,
    pub ttm_years: f64,
    pub premium: f64,
    pub closed_p: f64,
    pub mc_p_mean: f64,
    pub mc_p_se: f64,
    /// |closed − MC| in standard errors.
    pub p_gap_se: f64,
    pub closed_bs: f64,
    pub mc_bs_mean: f64,
    pub mc_bs_se: f64,
    pub bs_gap_se: f64,
}

/// splitmix64; decorrelates derived seeds from the user-facing one.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut x = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform_open(rng)
}

/// Draws `cases` random market configurations, prices each call, and compares
/// the closed-form probability of positive return (at the Black-Scholes
/// premium) and the Black-Scholes price against their Monte Carlo estimates.
pub fn oracle_suite(seed: u64, paths: u64, cases: u32) -> Result<Vec<SuiteCase>> {
    if cases == 0 {
        return Err(Error::domain("case count must be positive".to_string()));
    }
    let mut draw = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
    let mut out = Vec::with_capacity(cases as usize);
    for index in 0..cases {
        let s0 = uniform_in(&mut draw, 50.0, 200.0);
        let strike = s0 * uniform_in(&mut draw, 0.7, 1.3);
        let mu = uniform_in(&mut draw, -0.3, 0.3);
        let sigma = uniform_in(&mut draw, 0.05, 0.5);
        let rate = uniform_in(&mut draw, 0.0, 0.1);
        let t = uniform_in(&mut draw, 0.02, 1.0);
        let m = MarketParams::new(s0, mu, sigma, rate, 365)?;
        let c = CallContract::new(strike, t)?;

        let premium = bs_price(&m, &c);
        let closed_p = prob_positive_return(&m, &c, premium)?.p.value();
        let p_cfg = McConfig::new(paths, mix_seed(seed, 2 * index as u64 + 1), true)?;
        let mc_p = mc_prob_positive_return(&m, &c, premium, &p_cfg)?;
        // floor the denominator so a saturated (all-hit / no-hit) sample
        // still yields a finite gap
        let p_se = mc_p.std_error.max(1.0 / paths as f64);

        let bs_cfg = McConfig::new(paths, mix_seed(seed, 2 * index as u64 + 2), true)?;
        let mc_bs = mc_bs_price(&m, &c, &bs_cfg)?;
        let bs_se = mc_bs.std_error.max(1e-12 * s0);

        out.push(SuiteCase {
            index,
            s0,
            mu,
            sigma,
            rate,
            strike,
            ttm_years: t,
            premium,
            closed_p,
            mc_p_mean: mc_p.mean,
            mc_p_se: mc_p.std_error,
            p_gap_se: (closed_p - mc_p.mean).abs() / p_se,
            closed_bs: premium,
            mc_bs_mean: mc_bs.mean,
            mc_bs_se: mc_bs.std_error,
            bs_gap_se: (premium - mc_bs.mean).abs() / bs_se,
        });
    }
    Ok(out)
}
