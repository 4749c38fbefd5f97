//! Composite multi-leg presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Leg, Position, TokenPair, MAX_LEGS};
use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Short ATM put + short ATM call.
    Straddle,
    /// Short OTM put + short OTM call.
    Strangle,
    /// Put and call spreads around spot: long wing, short body on each side.
    IronCondor,
    /// Short OTM put + OTM call credit spread.
    JadeLizard,
    /// Long put + `ratio` short puts further OTM.
    RatioSpread,
    /// Put ratio spread + call ratio spread.
    Bats,
    /// One short ATM call + `ratio` long ITM calls, one leg each.
    Zebra,
    /// Jade lizard plus a long ATM put.
    SpikedLizard,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Straddle,
        Strategy::Strangle,
        Strategy::IronCondor,
        Strategy::JadeLizard,
        Strategy::RatioSpread,
        Strategy::Bats,
        Strategy::Zebra,
        Strategy::SpikedLizard,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Straddle => "straddle",
            Strategy::Strangle => "strangle",
            Strategy::IronCondor => "iron_condor",
            Strategy::JadeLizard => "jade_lizard",
            Strategy::RatioSpread => "ratio_spread",
            Strategy::Bats => "bats",
            Strategy::Zebra => "zebra",
            Strategy::SpikedLizard => "spiked_lizard",
        }
    }

    /// True for compositions whose worst-case loss is finite.
    pub fn is_defined_risk(&self) -> bool {
        matches!(self, Strategy::IronCondor)
    }

    pub fn build(&self, spot: f64, params: &StrategyParams) -> Result<Position> {
        ensure_positive("spot", spot)?;
        params.validate()?;
        let StrategyParams {
            offset,
            wing,
            range_factor: r,
            size,
            ratio,
            ..
        } = *params;
        let ratio_f = ratio as f64;
        let below = spot * (1.0 - offset);
        let above = spot * (1.0 + offset);
        let far_below = spot * (1.0 - offset - wing);
        let far_above = spot * (1.0 + offset + wing);

        let legs = match self {
            Strategy::Straddle => vec![
                Leg::put(spot, r, false, size)?,
                Leg::call(spot, r, false, size)?,
            ],
            Strategy::Strangle => vec![
                Leg::put(below, r, false, size)?,
                Leg::call(above, r, false, size)?,
            ],
            Strategy::IronCondor => vec![
                Leg::put(far_below, r, true, size)?,
                Leg::put(below, r, false, size)?,
                Leg::call(above, r, false, size)?,
                Leg::call(far_above, r, true, size)?,
            ],
            Strategy::JadeLizard => vec![
                Leg::put(below, r, false, size)?,
                Leg::call(above, r, false, size)?,
                Leg::call(far_above, r, true, size)?,
            ],
            Strategy::RatioSpread => vec![
                Leg::put(below, r, true, size)?,
                Leg::put(far_below, r, false, size * ratio_f)?,
            ],
            Strategy::Bats => vec![
                Leg::put(below, r, true, size)?,
                Leg::put(far_below, r, false, size * ratio_f)?,
                Leg::call(above, r, true, size)?,
                Leg::call(far_above, r, false, size * ratio_f)?,
            ],
            Strategy::Zebra => {
                let mut legs = vec![Leg::call(spot, r, false, size)?];
                for _ in 0..ratio {
                    legs.push(Leg::call(below, r, true, size)?);
                }
                legs
            }
            Strategy::SpikedLizard => vec![
                Leg::put(spot, r, true, size)?,
                Leg::put(below, r, false, size)?,
                Leg::call(above, r, false, size)?,
                Leg::call(far_above, r, true, size)?,
            ],
        };
        if legs.len() > MAX_LEGS {
            return Err(Error::Capacity { legs: legs.len() });
        }
        Position::new(params.pair.clone(), legs)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnsupportedStrategy(s.to_string()))
    }
}

/// Strike placement for presets, as fractions of spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// Distance of the body strikes from spot.
    pub offset: f64,
    /// Additional distance of the wing strikes beyond the body.
    pub wing: f64,
    pub range_factor: f64,
    pub size: f64,
    /// Multiplier of the ratio legs (ratio spread, BATS, ZEBRA).
    pub ratio: u32,
    pub pair: TokenPair,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            offset: 0.1,
            wing: 0.05,
            range_factor: 1.0,
            size: 1.0,
            ratio: 2,
            pair: TokenPair::default(),
        }
    }
}

impl StrategyParams {
    fn validate(&self) -> Result<()> {
        if !(self.offset >= 0.0 && self.wing >= 0.0 && self.offset + self.wing < 1.0) {
            return Err(Error::domain(format!(
                "offset {} and wing {} must be non-negative with offset + wing < 1",
                self.offset, self.wing
            )));
        }
        ensure_positive("size", self.size)?;
        if self.ratio == 0 {
            return Err(Error::domain("ratio must be at least 1"));
        }
        Ok(())
    }
}

/// Builds the named preset around `spot`.
pub fn strategy_preset(name: &str, spot: f64, params: &StrategyParams) -> Result<Position> {
    name.parse::<Strategy>()?.build(spot, params)
}
