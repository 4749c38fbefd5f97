//! Option legs backed by concentrated liquidity.
//!
//! A leg is a chunk of liquidity deployed on the price range
//! `[K/r, K·r]`, whose geometric mean `K` is the strike and `r` the range
//! factor. Below the range the chunk is all asset, above it is all
//! numeraire. Shorts hold the chunk; longs hold the opposite exposure
//! (liquidity removed from the venue).
//!
//! Puts and calls with the same `(K, r, size)` are the same liquidity chunk;
//! they differ only in which side of spot they are minted on, and therefore
//! in what they hold at entry.

mod strategy;
pub(crate) mod token;

pub use strategy::{strategy_preset, Strategy, StrategyParams};
pub use token::{decode, encode, DecodedToken, PositionToken, MAX_LEGS};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Price ratio between adjacent ticks.
pub const TICK_BASE: f64 = 1.0001;

/// Tick spacing used to represent the single-tick limit (`r = 1`); the 0.3%
/// fee tier.
pub const DEFAULT_TICK_SPACING: f64 = 0.006;

/// Narrowest range factor a leg is evaluated with: a range whose upper/lower
/// ratio is `1 + DEFAULT_TICK_SPACING`.
pub fn min_range_factor() -> f64 {
    (1.0 + DEFAULT_TICK_SPACING).sqrt()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenPair {
    pub numeraire: String,
    pub asset: String,
}

impl TokenPair {
    pub fn new(numeraire: impl Into<String>, asset: impl Into<String>) -> Result<Self> {
        let pair = Self {
            numeraire: numeraire.into(),
            asset: asset.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.numeraire == self.asset {
            return Err(Error::domain(format!(
                "numeraire and asset must differ (both `{}`)",
                self.numeraire
            )));
        }
        Ok(())
    }

    /// The same pool quoted the other way round.
    pub fn inverted(&self) -> Self {
        Self {
            numeraire: self.asset.clone(),
            asset: self.numeraire.clone(),
        }
    }
}

impl Default for TokenPair {
    fn default() -> Self {
        Self {
            numeraire: "DAI".into(),
            asset: "ETH".into(),
        }
    }
}

/// Token composition of a liquidity chunk.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Holdings {
    pub asset: f64,
    pub numeraire: f64,
}

impl Holdings {
    /// Numeraire value at `spot`.
    pub fn value_at(&self, spot: f64) -> f64 {
        self.asset * spot + self.numeraire
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            asset: self.asset * factor,
            numeraire: self.numeraire * factor,
        }
    }
}

impl std::ops::Add for Holdings {
    type Output = Holdings;

    fn add(self, rhs: Holdings) -> Holdings {
        Holdings {
            asset: self.asset + rhs.asset,
            numeraire: self.numeraire + rhs.numeraire,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    /// Geometric mean of the range, numeraire per asset.
    pub strike: f64,
    /// `sqrt(upper / lower)`; `1` means the single-tick limit.
    pub range_factor: f64,
    pub is_put: bool,
    pub is_long: bool,
    /// Contracts: one contract relocates `strike` numeraire (or one asset).
    pub size: f64,
}

impl Leg {
    pub fn new(strike: f64, range_factor: f64, is_put: bool, is_long: bool, size: f64) -> Result<Self> {
        let leg = Self {
            strike,
            range_factor,
            is_put,
            is_long,
            size,
        };
        leg.validate()?;
        Ok(leg)
    }

    pub fn put(strike: f64, range_factor: f64, is_long: bool, size: f64) -> Result<Self> {
        Self::new(strike, range_factor, true, is_long, size)
    }

    pub fn call(strike: f64, range_factor: f64, is_long: bool, size: f64) -> Result<Self> {
        Self::new(strike, range_factor, false, is_long, size)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("strike", self.strike)?;
        ensure_non_negative("size", self.size)?;
        if !(self.range_factor >= 1.0 && self.range_factor.is_finite()) {
            return Err(Error::domain(format!(
                "range factor must be >= 1, got {}",
                self.range_factor
            )));
        }
        Ok(())
    }

    /// Range factor actually used for liquidity math; never narrower than
    /// one tick spacing.
    pub fn effective_range_factor(&self) -> f64 {
        self.range_factor.max(min_range_factor())
    }

    pub fn lower(&self) -> f64 {
        self.strike / self.effective_range_factor()
    }

    pub fn upper(&self) -> f64 {
        self.strike * self.effective_range_factor()
    }

    /// Numeraire relocated by the leg, valued at the strike.
    pub fn notional(&self) -> f64 {
        self.size * self.strike
    }

    pub fn sign(&self) -> f64 {
        if self.is_long {
            -1.0
        } else {
            1.0
        }
    }

    /// Virtual liquidity `L` such that the chunk holds `size·K` numeraire
    /// above the range (equivalently `size` asset below it).
    pub fn liquidity(&self) -> f64 {
        let (sl, su) = (self.lower().sqrt(), self.upper().sqrt());
        self.notional() / (su - sl)
    }

    /// Token amounts held by the chunk at `spot`.
    pub fn holdings(&self, spot: f64) -> Result<Holdings> {
        ensure_positive("spot", spot)?;
        let (lower, upper) = (self.lower(), self.upper());
        if spot <= lower {
            return Ok(Holdings {
                asset: self.size,
                numeraire: 0.0,
            });
        }
        if spot >= upper {
            return Ok(Holdings {
                asset: 0.0,
                numeraire: self.notional(),
            });
        }
        let l = self.liquidity();
        let sp = spot.sqrt();
        Ok(Holdings {
            asset: l * (1.0 / sp - 1.0 / upper.sqrt()),
            numeraire: l * (sp - lower.sqrt()),
        })
    }

    /// Profit at `spot` of a leg opened at `entry_spot`, measured against
    /// the tokens borrowed at entry valued at the current spot.
    pub fn profit(&self, spot: f64, entry_spot: f64) -> Result<f64> {
        let entry = self.holdings(entry_spot)?;
        let now = self.holdings(spot)?;
        Ok(self.sign() * (now.value_at(spot) - entry.value_at(spot)))
    }

    /// The same leg seen from the inverted pair: strike `1/K`, size scaled
    /// so the relocated amount is unchanged, put and call swapped.
    pub fn dual(&self) -> Leg {
        Leg {
            strike: 1.0 / self.strike,
            range_factor: self.range_factor,
            is_put: !self.is_put,
            is_long: self.is_long,
            size: self.size * self.strike,
        }
    }
}

/// Numeraire value of the liquidity chunk backing `leg` at `spot`.
pub fn lp_value(leg: &Leg, spot: f64) -> Result<f64> {
    leg.validate()?;
    Ok(leg.holdings(spot)?.value_at(spot))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PositionRepr")]
pub struct Position {
    pub pair: TokenPair,
    pub legs: Vec<Leg>,
}

#[derive(Deserialize)]
struct PositionRepr {
    pair: TokenPair,
    legs: Vec<Leg>,
}

impl TryFrom<PositionRepr> for Position {
    type Error = Error;

    fn try_from(repr: PositionRepr) -> Result<Self> {
        Position::new(repr.pair, repr.legs)
    }
}

impl Position {
    pub fn new(pair: TokenPair, legs: Vec<Leg>) -> Result<Self> {
        let position = Self { pair, legs };
        position.validate()?;
        Ok(position)
    }

    pub fn single(pair: TokenPair, leg: Leg) -> Result<Self> {
        Self::new(pair, vec![leg])
    }

    pub fn validate(&self) -> Result<()> {
        self.pair.validate()?;
        if self.legs.is_empty() {
            return Err(Error::domain("position has no legs"));
        }
        if self.legs.len() > MAX_LEGS {
            return Err(Error::Capacity {
                legs: self.legs.len(),
            });
        }
        self.legs.iter().try_for_each(Leg::validate)
    }

    pub fn notional(&self) -> f64 {
        self.legs.iter().map(Leg::notional).sum()
    }

    /// Mirror position on the inverted pair.
    pub fn dual(&self) -> Position {
        Position {
            pair: self.pair.inverted(),
            legs: self.legs.iter().map(Leg::dual).collect(),
        }
    }
}

/// Profit of `position` at `spot` for an entry at `entry_spot`.
pub fn payoff(position: &Position, spot: f64, entry_spot: f64) -> Result<f64> {
    if position.legs.is_empty() {
        return Err(Error::domain("position has no legs"));
    }
    ensure_positive("spot", spot)?;
    ensure_positive("entry spot", entry_spot)?;
    position
        .legs
        .iter()
        .map(|leg| leg.profit(spot, entry_spot))
        .sum()
}

/// `(price, profit)` pairs over `grid`, with `entry_spot` as the entry.
pub fn payoff_curve(position: &Position, grid: &[f64], entry_spot: f64) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::domain("payoff grid is empty"));
    }
    grid.iter()
        .map(|&p| payoff(position, p, entry_spot).map(|v| (p, v)))
        .collect()
}

/// `n` prices spaced geometrically between `lo` and `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    ensure_positive("grid lower bound", lo)?;
    ensure_positive("grid upper bound", hi)?;
    if n == 0 || hi < lo {
        return Err(Error::domain(format!("invalid grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| lo * (step * i as f64).exp()).collect())
}
