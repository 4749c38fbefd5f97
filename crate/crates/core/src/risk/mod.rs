//! Collateral requirements, the Cboe reference margin, pool utilization
//! and the utilization-linked curves.
//!
//! Requirements are per leg. A multi-leg position requires the sum of its
//! legs; no spread netting is applied.

mod curves;

pub use curves::{utilization_curves_eval, utilization_target, PiecewiseLinear, UtilizationCurves};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::instrument::Leg;
use crate::pool::{premium_owed, PoolState};

/// Seller base ratio when utilization is not adjusting it.
pub const DEFAULT_SELLER_RATIO: f64 = 0.20;
pub const DEFAULT_BUYER_RATIO: f64 = 0.10;

/// Intrinsic value of `leg` at `spot`, scaled by its size.
pub fn itm_amount(leg: &Leg, spot: f64) -> Result<f64> {
    ensure_positive("spot", spot)?;
    let per_unit = if leg.is_put {
        leg.strike - spot
    } else {
        spot - leg.strike
    };
    Ok(per_unit.max(0.0) * leg.size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub requirement: f64,
    /// `ratio · notional`.
    pub base_component: f64,
    /// `max(itm, 0)`, added for sellers and subtracted for buyers.
    pub itm_component: f64,
    /// Signed contribution of accrued premium: negative for sellers.
    pub premium_component: f64,
    pub ratio_used: f64,
}

fn check_inputs(notional: f64, premium: f64, ratio: f64) -> Result<()> {
    ensure_non_negative("notional", notional)?;
    if !premium.is_finite() {
        return Err(Error::domain(format!("premium must be finite, got {premium}")));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::domain(format!("base ratio must lie in (0, 1], got {ratio}")));
    }
    Ok(())
}

/// `max(0, ratio·notional + max(itm, 0) − premium_accrued)`.
pub fn seller_requirement(notional: f64, itm: f64, premium_accrued: f64, base_ratio: f64) -> Result<MarginReport> {
    check_inputs(notional, premium_accrued, base_ratio)?;
    let base = base_ratio * notional;
    let itm = itm.max(0.0);
    Ok(MarginReport {
        requirement: (base + itm - premium_accrued).max(0.0),
        base_component: base,
        itm_component: itm,
        premium_component: -premium_accrued,
        ratio_used: base_ratio,
    })
}

/// `max(0, ratio·notional − max(itm, 0) + premium_accrued)`.
pub fn buyer_requirement(notional: f64, itm: f64, premium_accrued: f64, base_ratio: f64) -> Result<MarginReport> {
    check_inputs(notional, premium_accrued, base_ratio)?;
    let base = base_ratio * notional;
    let itm = itm.max(0.0);
    Ok(MarginReport {
        requirement: (base - itm + premium_accrued).max(0.0),
        base_component: base,
        itm_component: itm,
        premium_component: premium_accrued,
        ratio_used: base_ratio,
    })
}

/// Cboe short-option margin: option proceeds plus 20% of the underlying
/// less the out-of-the-money amount, floored at proceeds plus 10% of the
/// strike (puts) or of the underlying (calls). Prices are per share.
pub fn cboe_margin(premium: f64, spot: f64, strike: f64, is_put: bool, multiplier: f64) -> Result<f64> {
    ensure_positive("premium", premium)?;
    ensure_positive("spot", spot)?;
    ensure_positive("strike", strike)?;
    if !(multiplier >= 1.0 && multiplier.is_finite()) {
        return Err(Error::domain(format!("multiplier must be >= 1, got {multiplier}")));
    }
    let (otm, floor_base) = if is_put {
        ((spot - strike).max(0.0), strike)
    } else {
        ((strike - spot).max(0.0), spot)
    };
    let main = premium + 0.2 * spot - otm;
    let floor = premium + 0.1 * floor_base;
    Ok(main.max(floor) * multiplier)
}

/// Collateral check of one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solvency {
    pub solvent: bool,
    /// Current value of the account's pool shares.
    pub collateral: f64,
    pub requirement: f64,
    pub shortfall: f64,
    /// One report per open leg, in position-id then leg order.
    pub legs: Vec<MarginReport>,
}

/// Sums per-leg requirements over the account's open positions at the
/// current utilization-adjusted seller ratio. Accrued premium enters the
/// leg requirements only; it is not also added to collateral.
pub fn account_solvent(state: &PoolState, account: &str, spot: f64) -> Result<Solvency> {
    ensure_positive("spot", spot)?;
    let collateral = state.account_value(account)?;
    let seller_ratio = state.seller_ratio()?;
    let buyer_ratio = state.config().buyer_ratio;
    let mut legs = Vec::new();
    for (&id, open) in state.positions_of(account)? {
        let quote = premium_owed(state, id)?;
        for (leg, prem) in open.position.legs.iter().zip(&quote.legs) {
            let itm = itm_amount(leg, spot)?;
            let report = if leg.is_long {
                buyer_requirement(leg.notional(), itm, prem.net, buyer_ratio)?
            } else {
                seller_requirement(leg.notional(), itm, prem.net, seller_ratio)?
            };
            legs.push(report);
        }
    }
    let requirement: f64 = legs.iter().map(|r| r.requirement).sum();
    let shortfall = (requirement - collateral).max(0.0);
    Ok(Solvency {
        solvent: shortfall == 0.0,
        collateral,
        requirement,
        shortfall,
        legs,
    })
}

/// `locked / (total − notional)`.
pub fn pool_utilization(state: &PoolState) -> Result<f64> {
    utilization(
        state.total_liquidity(),
        state.total_notional_value(),
        state.total_locked_liquidity(),
    )
}

/// Utilization from the three aggregates.
pub fn utilization(total: f64, notional: f64, locked: f64) -> Result<f64> {
    let free = total - notional;
    if !(free > 0.0) {
        return Err(Error::DegeneratePool { total, notional });
    }
    Ok(locked / free)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn itm_examples() {
        let put = Leg::put(2000.0, 1.0, false, 1.0).unwrap();
        assert_eq!(itm_amount(&put, 2500.0).unwrap(), 0.0);
        assert_eq!(itm_amount(&put, 1800.0).unwrap(), 200.0);
        let call = Leg::call(2000.0, 1.0, false, 1.0).unwrap();
        assert_eq!(itm_amount(&call, 2300.0).unwrap(), 300.0);
        assert!(itm_amount(&call, 0.0).is_err());
    }

    #[test]
    fn seller_examples() {
        assert_eq!(seller_requirement(2000.0, 0.0, 0.0, 0.2).unwrap().requirement, 400.0);
        assert_eq!(seller_requirement(2000.0, 200.0, 0.0, 0.2).unwrap().requirement, 600.0);
        assert_eq!(seller_requirement(2000.0, 200.0, 700.0, 0.2).unwrap().requirement, 0.0);
        assert_eq!(2000.0 / seller_requirement(2000.0, 0.0, 0.0, 0.2).unwrap().requirement, 5.0);
        assert!(seller_requirement(2000.0, 0.0, 0.0, 0.0).is_err());
        assert!(seller_requirement(-1.0, 0.0, 0.0, 0.2).is_err());
    }

    #[test]
    fn buyer_examples() {
        assert_eq!(buyer_requirement(1000.0, 0.0, 0.0, 0.1).unwrap().requirement, 100.0);
        assert_eq!(buyer_requirement(1000.0, 150.0, 30.0, 0.1).unwrap().requirement, 0.0);
        assert_eq!(buyer_requirement(1000.0, 0.0, 50.0, 0.1).unwrap().requirement, 150.0);
    }

    #[test]
    fn report_components() {
        let r = seller_requirement(1000.0, 50.0, 20.0, 0.2).unwrap();
        assert_eq!((r.base_component, r.itm_component, r.premium_component), (200.0, 50.0, -20.0));
        assert_eq!(r.requirement, r.base_component + r.itm_component + r.premium_component);
    }

    #[test]
    fn cboe_worked_example() {
        assert_eq!(cboe_margin(1.5, 50.0, 49.0, true, 100.0).unwrap(), 1050.0);
    }

    #[test]
    fn cboe_deep_itm_put_drops_otm_term() {
        assert_eq!(cboe_margin(12.0, 50.0, 60.0, true, 100.0).unwrap(), (12.0 + 0.2 * 50.0) * 100.0);
    }

    #[test]
    fn cboe_far_otm_hits_floor() {
        let m = cboe_margin(0.1, 50.0, 30.0, true, 1.0).unwrap();
        assert_eq!(m, 0.1 + 0.1 * 30.0);
        let c = cboe_margin(0.1, 50.0, 80.0, false, 1.0).unwrap();
        assert_eq!(c, 0.1 + 0.1 * 50.0);
        assert!(cboe_margin(0.1, 50.0, 80.0, false, 0.5).is_err());
    }

    #[test]
    fn utilization_examples() {
        assert_eq!(utilization(1000.0, 900.0, 0.0).unwrap(), 0.0);
        assert_eq!(utilization(1000.0, 900.0, 50.0).unwrap(), 0.5);
        assert!(matches!(utilization(1000.0, 1000.0, 0.0), Err(Error::DegeneratePool { .. })));
    }
}
