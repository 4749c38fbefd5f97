//! Zero-rate Black-Scholes pieces and streaming-premium pricing.
//!
//! The streaming premium of an option is the time integral of its theta
//! along the realized price path. Averaged over GBM paths it converges to
//! the Black-Scholes price; individual paths can cost nothing or several
//! times the BS price. [`montecarlo`] measures that distribution.

pub mod montecarlo;
mod path;
mod premium;

pub use montecarlo::{
    mc_premium_distribution, path_seed, CheckpointStats, Estimator, PremiumStats, PremiumStudy, StudyOutcome,
};
pub use path::{simulate_gbm, GbmParams, PricePath, MINUTE_IN_YEARS};
pub use premium::{stream_premium_expiring, stream_premium_theta, stream_premium_tick};

use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::numeric::norm_cdf;

#[inline]
pub(crate) fn theta_unchecked(s: f64, k: f64, sigma: f64, t: f64) -> f64 {
    let var = sigma * sigma * t;
    let x = (s / k).ln() + 0.5 * var;
    s * sigma / (8.0 * PI * t).sqrt() * (-x * x / (2.0 * var)).exp()
}

/// Time decay of a zero-rate call, `∂C/∂t` with `t` the time to expiry:
/// `(sσ/√(8πt))·exp(−[ln(s/k) + σ²t/2]² / (2σ²t))`.
pub fn bs_theta(s: f64, k: f64, sigma: f64, t: f64) -> Result<f64> {
    ensure_positive("spot", s)?;
    ensure_positive("strike", k)?;
    ensure_positive("sigma", sigma)?;
    ensure_positive("time to expiry", t)?;
    Ok(theta_unchecked(s, k, sigma, t))
}

/// Zero-rate Black-Scholes call; intrinsic value at `t = 0`.
pub fn bs_call_price(s: f64, k: f64, sigma: f64, t: f64) -> Result<f64> {
    ensure_positive("spot", s)?;
    ensure_positive("strike", k)?;
    ensure_positive("sigma", sigma)?;
    ensure_non_negative("time to expiry", t)?;
    let v = sigma * t.sqrt();
    if v == 0.0 {
        return Ok((s - k).max(0.0));
    }
    let d1 = ((s / k).ln() + 0.5 * v * v) / v;
    let d2 = d1 - v;
    Ok((s * norm_cdf(d1) - k * norm_cdf(d2)).max(0.0))
}

fn ensure_range_factor(r: f64) -> Result<f64> {
    if r >= 1.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::domain(format!("range factor must be >= 1, got {r}")))
    }
}

/// Effective days-to-expiration (in years) of a range with factor `r`:
/// `(2π/σ²)·((√r − 1)/(√r + 1))²`.
pub fn effective_dte(r: f64, sigma: f64) -> Result<f64> {
    ensure_range_factor(r)?;
    ensure_positive("sigma", sigma)?;
    let q = (r.sqrt() - 1.0) / (r.sqrt() + 1.0);
    Ok(2.0 * PI / (sigma * sigma) * q * q)
}

/// Inverse of [`effective_dte`]. Only `t < 2π/σ²` is reachable; larger
/// horizons would need an infinitely wide range.
pub fn range_for_dte(t: f64, sigma: f64) -> Result<f64> {
    ensure_non_negative("time", t)?;
    ensure_positive("sigma", sigma)?;
    let q = (t * sigma * sigma / (2.0 * PI)).sqrt();
    if q >= 1.0 {
        return Err(Error::domain(format!(
            "effective DTE {t} is not reachable at sigma {sigma} (limit {})",
            2.0 * PI / (sigma * sigma)
        )));
    }
    let root = (1.0 + q) / (1.0 - q);
    Ok(root * root)
}

/// Upper bound on gamma for a range of factor `r > 1` around `k`.
pub fn gamma_cap(k: f64, r: f64) -> Result<f64> {
    ensure_positive("strike", k)?;
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::domain(format!("gamma cap needs r > 1, got {r}")));
    }
    Ok(2.0 / (k * PI * r.ln()))
}

/// Volatility implied by fees collected at a tick:
/// `2·fee_rate·√(volume / tick_liquidity)`.
pub fn implied_vol(fee_rate: f64, volume: f64, tick_liquidity: f64) -> Result<f64> {
    ensure_non_negative("fee rate", fee_rate)?;
    ensure_non_negative("volume", volume)?;
    ensure_positive("tick liquidity", tick_liquidity)?;
    Ok(2.0 * fee_rate * (volume / tick_liquidity).sqrt())
}
