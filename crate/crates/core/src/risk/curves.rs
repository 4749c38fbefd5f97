//! Utilization-linked collateral and commission curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear function on `[0, 1]` given by `(u, value)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinear {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        PiecewiseLinear::new(knots)
    }
}

impl From<PiecewiseLinear> for Vec<(f64, f64)> {
    fn from(curve: PiecewiseLinear) -> Self {
        curve.knots
    }
}

impl PiecewiseLinear {
    /// Knots must start at `u = 0`, end at `u = 1` and be strictly
    /// increasing in `u`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::domain("a curve needs at least two knots"));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::domain("curve knots must span u = 0 to u = 1"));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::domain("curve knots must be strictly increasing in u"));
        }
        if knots.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::domain("curve values must be finite"));
        }
        Ok(Self { knots })
    }

    pub fn linear(at_zero: f64, at_one: f64) -> Result<Self> {
        Self::new(vec![(0.0, at_zero), (1.0, at_one)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("utilization {u} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(u))
    }

    fn eval_unchecked(&self, u: f64) -> f64 {
        let i = self.knots.partition_point(|&(x, _)| x <= u);
        if i == 0 {
            return self.knots[0].1;
        }
        let (u0, v0) = self.knots[i - 1];
        if u == u0 || i == self.knots.len() {
            return v0;
        }
        let (u1, v1) = self.knots[i];
        v0 + (v1 - v0) * (u - u0) / (u1 - u0)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    fn value_range(&self) -> (f64, f64) {
        self.knots
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)))
    }
}

/// Seller collateral ratio and commission rate as functions of pool
/// utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurvesRepr")]
pub struct UtilizationCurves {
    pub collateral: PiecewiseLinear,
    pub commission: PiecewiseLinear,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvesRepr {
    collateral: PiecewiseLinear,
    commission: PiecewiseLinear,
}

impl TryFrom<CurvesRepr> for UtilizationCurves {
    type Error = Error;

    fn try_from(r: CurvesRepr) -> Result<Self> {
        UtilizationCurves::new(r.collateral, r.commission)
    }
}

impl Default for UtilizationCurves {
    /// Collateral 20% → 100% and commission 0.20% → 0, both linear.
    fn default() -> Self {
        Self {
            collateral: PiecewiseLinear::linear(0.2, 1.0).expect("valid default"),
            commission: PiecewiseLinear::linear(0.002, 0.0).expect("valid default"),
        }
    }
}

impl UtilizationCurves {
    pub fn new(collateral: PiecewiseLinear, commission: PiecewiseLinear) -> Result<Self> {
        if !collateral.is_non_decreasing() {
            return Err(Error::domain("collateral curve must be non-decreasing"));
        }
        if collateral.knots().iter().any(|&(_, v)| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::domain("collateral ratios must lie in (0, 1]"));
        }
        if !commission.is_non_increasing() {
            return Err(Error::domain("commission curve must be non-increasing"));
        }
        if commission.knots().iter().any(|&(_, v)| v < 0.0) {
            return Err(Error::domain("commission rates must be non-negative"));
        }
        Ok(Self { collateral, commission })
    }

    /// `(seller collateral ratio, commission rate)` at utilization `u`.
    pub fn eval(&self, u: f64) -> Result<(f64, f64)> {
        Ok((self.collateral.eval(u)?, self.commission.eval(u)?))
    }

    /// Utilization where the two curves cross after each is rescaled
    /// affinely onto `[0, 1]` over its own value range.
    pub fn target(&self) -> Result<f64> {
        let (clo, chi) = self.collateral.value_range();
        let (mlo, mhi) = self.commission.value_range();
        if !(chi > clo) || !(mhi > mlo) {
            return Err(Error::NoTarget);
        }
        let c = |u: f64| (self.collateral.eval_unchecked(u) - clo) / (chi - clo);
        let m = |u: f64| (self.commission.eval_unchecked(u) - mlo) / (mhi - mlo);
        let mut xs: Vec<f64> = self
            .collateral
            .knots()
            .iter()
            .chain(self.commission.knots())
            .map(|&(u, _)| u)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let diff = |u: f64| c(u) - m(u);
        for w in xs.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            let (d0, d1) = (diff(u0), diff(u1));
            if d0 == 0.0 {
                return Ok(u0);
            }
            if d0 < 0.0 && d1 >= 0.0 || d0 > 0.0 && d1 <= 0.0 {
                return Ok(u0 + (0.0 - d0) * (u1 - u0) / (d1 - d0));
            }
        }
        if diff(1.0) == 0.0 {
            return Ok(1.0);
        }
        Err(Error::NoTarget)
    }
}

/// Free-function form of [`UtilizationCurves::eval`].
pub fn utilization_curves_eval(curves: &UtilizationCurves, u: f64) -> Result<(f64, f64)> {
    curves.eval(u)
}

/// Free-function form of [`UtilizationCurves::target`].
pub fn utilization_target(curves: &UtilizationCurves) -> Result<f64> {
    curves.target()
}
