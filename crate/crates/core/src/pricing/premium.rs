//! Streaming-premium estimators over a price path.
//!
//! Both estimators use the price at the start of each step (left-point
//! rule), which makes them additive over concatenated paths.

use std::f64::consts::PI;

use super::{theta_unchecked, PricePath};
use crate::error::{ensure_positive, Error, Result};
use crate::numeric::CompensatedSum;

/// Accrues `θ(s, k, σ, dt_theta)·Δt` per step.
#[derive(Debug, Clone)]
pub(crate) struct ThetaAccumulator {
    k: f64,
    prefactor: f64,
    half_var: f64,
    inv_two_var: f64,
    sum: CompensatedSum,
}

impl ThetaAccumulator {
    pub(crate) fn new(k: f64, sigma: f64, dt_theta: f64) -> Self {
        let var = sigma * sigma * dt_theta;
        Self {
            k,
            prefactor: sigma / (8.0 * PI * dt_theta).sqrt(),
            half_var: 0.5 * var,
            inv_two_var: 1.0 / (2.0 * var),
            sum: CompensatedSum::new(),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, s: f64, dt: f64) {
        let x = (s / self.k).ln() + self.half_var;
        let theta = s * self.prefactor * (-x * x * self.inv_two_var).exp();
        self.sum.add(theta * dt);
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum.value()
    }
}

/// Accrues time spent in `[k(1 − tS/2), k(1 + tS/2)]`, paid at the height
/// `kσ²/(2·tS)` of the delta-function approximation to theta.
#[derive(Debug, Clone)]
pub(crate) struct TickAccumulator {
    lower: f64,
    upper: f64,
    height: f64,
    time: CompensatedSum,
}

impl TickAccumulator {
    pub(crate) fn new(k: f64, sigma: f64, tick_spacing: f64) -> Self {
        Self {
            lower: k * (1.0 - 0.5 * tick_spacing),
            upper: k * (1.0 + 0.5 * tick_spacing),
            height: k * sigma * sigma / (2.0 * tick_spacing),
            time: CompensatedSum::new(),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, s: f64, dt: f64) {
        if s >= self.lower && s <= self.upper {
            self.time.add(dt);
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.height * self.time.value()
    }
}

pub(crate) fn validate_tick_spacing(tick_spacing: f64) -> Result<f64> {
    if tick_spacing > 0.0 && tick_spacing < 1.0 {
        Ok(tick_spacing)
    } else {
        Err(Error::domain(format!("tick spacing must lie in (0, 1), got {tick_spacing}")))
    }
}

/// Premium accrued along `path` by integrating theta with a fixed residual
/// time `dt_theta`.
pub fn stream_premium_theta(path: &PricePath, k: f64, sigma: f64, dt_theta: f64) -> Result<f64> {
    ensure_positive("strike", k)?;
    ensure_positive("sigma", sigma)?;
    ensure_positive("dt_theta", dt_theta)?;
    let mut acc = ThetaAccumulator::new(k, sigma, dt_theta);
    for (s, dt) in path.steps() {
        acc.push(s, dt);
    }
    Ok(acc.value())
}

/// Premium accrued by the tick-occupancy estimator.
pub fn stream_premium_tick(path: &PricePath, k: f64, sigma: f64, tick_spacing: f64) -> Result<f64> {
    ensure_positive("strike", k)?;
    ensure_positive("sigma", sigma)?;
    validate_tick_spacing(tick_spacing)?;
    let mut acc = TickAccumulator::new(k, sigma, tick_spacing);
    for (s, dt) in path.steps() {
        acc.push(s, dt);
    }
    Ok(acc.value())
}

/// Theta integral of an option expiring at `expiry` (years from the path
/// start): each step accrues theta at its mid-step residual time. On a
/// constant path this converges to the Black-Scholes call price.
pub fn stream_premium_expiring(path: &PricePath, k: f64, sigma: f64, expiry: f64) -> Result<f64> {
    ensure_positive("strike", k)?;
    ensure_positive("sigma", sigma)?;
    if !(expiry >= path.duration()) {
        return Err(Error::domain(format!(
            "expiry {expiry} precedes the end of the path {}",
            path.duration()
        )));
    }
    let mut sum = CompensatedSum::new();
    let t = path.times();
    for (i, (s, dt)) in path.steps().enumerate() {
        let residual = expiry - 0.5 * (t[i] + t[i + 1]);
        sum.add(theta_unchecked(s, k, sigma, residual) * dt);
    }
    Ok(sum.value())
}
