//! The liquidity ledger: LP deposits, the mint/close lifecycle, the three
//! pool aggregates and fee-growth premiums.
//!
//! All values are in numeraire. LP equity is tracked with pool shares; an
//! account's collateral is the value of its shares. Flows that leave the
//! pool (fees earned by deployed liquidity, exercise settlement) are booked
//! against a single outside counterparty, `market_balance`, so that
//! `total_liquidity + market_balance` always equals net deposits.
//!
//! Premium model per leg, with `T` the fees earned since entry by the
//! liquidity currently deployed in the leg's range:
//!
//! * short: `T · n/(b0 + n)`, paid to the seller less a spread `n/b0`;
//!   `b0` is the range's base liquidity before the sale.
//! * long: `T · n/(l1 − N)`, paid by the buyer plus a spread `n/l1`;
//!   `l1` is the base at the account's first purchase in the range and
//!   `N` the account's open long liquidity there.

mod events;
mod ledger;

pub use events::{replay, replay_str, Event, Journal, Outcome, StepRecord};
pub use ledger::{premium_owed, LegPremium, MintReceipt, PremiumQuote, Settlement};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::instrument::token::{strike_tick, width_ticks};
use crate::instrument::{Leg, Position, PositionToken};
use crate::risk::{utilization, UtilizationCurves, DEFAULT_BUYER_RATIO};

/// Inputs of the range fee formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeGrowthInputs {
    pub fg_upper: f64,
    pub fg_lower: f64,
    pub fg_inside_last: f64,
    pub liquidity: f64,
}

/// `(fg_upper − fg_lower − fg_inside_last) · liquidity`.
pub fn total_fees(inputs: &FeeGrowthInputs) -> Result<f64> {
    let FeeGrowthInputs {
        fg_upper,
        fg_lower,
        fg_inside_last,
        liquidity,
    } = *inputs;
    ensure_non_negative("liquidity", liquidity)?;
    if liquidity == 0.0 {
        return Ok(0.0);
    }
    let fees = (fg_upper - fg_lower - fg_inside_last) * liquidity;
    if !(fees >= 0.0) {
        return Err(Error::Accounting(format!(
            "fee growth went backwards: upper {fg_upper}, lower {fg_lower}, last {fg_inside_last}"
        )));
    }
    Ok(fees)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Long,
    Short,
}

/// `size/(base − size)` for longs, `size/(base + size)` for shorts.
///
/// A short may enter an empty range (`base = 0`); a long needs
/// `size < base`.
pub fn effective_liquidity_factor(size: f64, base: f64, side: Side) -> Result<f64> {
    ensure_non_negative("position size", size)?;
    ensure_non_negative("base liquidity", base)?;
    match side {
        Side::Long => {
            ensure_positive("base liquidity", base)?;
            if size >= base {
                return Err(Error::DrainedLiquidity { size, base });
            }
            Ok(size / (base - size))
        }
        Side::Short => {
            if base + size == 0.0 {
                return Err(Error::domain("short factor needs base + size > 0"));
            }
            Ok(size / (base + size))
        }
    }
}

/// `size / base`.
pub fn spread(size: f64, base: f64) -> Result<f64> {
    ensure_non_negative("position size", size)?;
    ensure_positive("base liquidity", base)?;
    Ok(size / base)
}

/// Factor of an enlarged purchase: `(n1 + n2)/(l1 − n1 − n2)`.
pub fn merge_purchase(n1: f64, l1: f64, n2: f64) -> Result<f64> {
    ensure_non_negative("existing size", n1)?;
    ensure_non_negative("additional size", n2)?;
    effective_liquidity_factor(n1 + n2, l1, Side::Long)
}

/// A liquidity range on the tick grid: strike tick and width in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeKey {
    pub tick: i32,
    pub width: u16,
}

impl RangeKey {
    /// The range a leg's liquidity is deployed in.
    pub fn of(leg: &Leg) -> Result<RangeKey> {
        let tick = strike_tick(leg.strike);
        let width = width_ticks(leg.range_factor);
        Ok(RangeKey {
            tick: i32::try_from(tick).map_err(|_| Error::EncodingRange(format!("tick {tick}")))?,
            width: u16::try_from(width).map_err(|_| Error::EncodingRange(format!("width {width}")))?,
        })
    }
}

impl fmt::Display for RangeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tick, self.width)
    }
}

impl FromStr for RangeKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("range key `{s}` is not `tick:width`"));
        let (t, w) = s.split_once(':').ok_or_else(bad)?;
        Ok(RangeKey {
            tick: t.parse().map_err(|_| bad())?,
            width: w.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for RangeKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RangeKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeLedger {
    /// Liquidity sold into the range; purchases do not reduce it.
    pub base_liquidity: f64,
    pub sold: f64,
    pub bought: f64,
    /// Fee-growth marks at the range boundaries; inside growth is
    /// `fg_upper − fg_lower`.
    pub fg_upper: f64,
    pub fg_lower: f64,
    /// Inside growth when the range's liquidity last changed.
    pub fg_inside_last: f64,
}

impl RangeLedger {
    pub fn fg_inside(&self) -> f64 {
        self.fg_upper - self.fg_lower
    }

    /// Liquidity currently deployed in the underlying pool.
    pub fn deployed(&self) -> f64 {
        self.sold - self.bought
    }
}

/// Open long liquidity of one account in one range, with the base the
/// account first bought against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongBook {
    pub base: f64,
    pub open: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    /// Net numeraire deposited (deposits less withdrawals).
    pub deposited: f64,
    pub shares: f64,
    pub positions: BTreeSet<u64>,
    #[serde(default)]
    pub long_books: BTreeMap<RangeKey, LongBook>,
}

/// Entry snapshot of one leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegEntry {
    pub range: RangeKey,
    pub notional: f64,
    pub fg_entry: f64,
    /// `b0` for shorts, `l1` for longs.
    pub base: f64,
    /// Creation-time spread.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenPosition {
    pub owner: String,
    pub token: PositionToken,
    /// Token units held; leg sizes are `ratio · amount`.
    pub amount: f64,
    pub position: Position,
    pub entry_spot: f64,
    pub legs: Vec<LegEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub pool_id: u64,
    pub commission_rate: f64,
    pub buyer_ratio: f64,
    /// Seller collateral ratio as a function of utilization.
    pub curves: UtilizationCurves,
    /// How many range widths a long must be out of the money before an LP
    /// may force its exercise.
    pub force_close_widths: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            pool_id: 0,
            commission_rate: 0.001,
            buyer_ratio: DEFAULT_BUYER_RATIO,
            curves: UtilizationCurves::default(),
            force_close_widths: 1.0,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("commission rate", self.commission_rate)?;
        if self.commission_rate >= 1.0 {
            return Err(Error::domain("commission rate must be below 1"));
        }
        if !(self.buyer_ratio > 0.0 && self.buyer_ratio <= 1.0) {
            return Err(Error::domain("buyer ratio must lie in (0, 1]"));
        }
        ensure_non_negative("force close widths", self.force_close_widths)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    config: PoolConfig,
    total_liquidity: f64,
    total_shares: f64,
    total_notional_value: f64,
    total_locked_liquidity: f64,
    /// Net value paid out of the pool to the outside counterparty.
    market_balance: f64,
    /// Losses no account could cover.
    bad_debt: f64,
    ranges: BTreeMap<RangeKey, RangeLedger>,
    accounts: BTreeMap<String, AccountState>,
    positions: BTreeMap<u64, OpenPosition>,
    next_position_id: u64,
}

impl Default for PoolState {
    fn default() -> Self {
        Self::new(PoolConfig::default()).expect("default config is valid")
    }
}

impl PoolState {
    pub fn new(config: PoolConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            total_liquidity: 0.0,
            total_shares: 0.0,
            total_notional_value: 0.0,
            total_locked_liquidity: 0.0,
            market_balance: 0.0,
            bad_debt: 0.0,
            ranges: BTreeMap::new(),
            accounts: BTreeMap::new(),
            positions: BTreeMap::new(),
            next_position_id: 0,
        })
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn total_liquidity(&self) -> f64 {
        self.total_liquidity
    }

    pub fn total_shares(&self) -> f64 {
        self.total_shares
    }

    pub fn total_notional_value(&self) -> f64 {
        self.total_notional_value
    }

    pub fn total_locked_liquidity(&self) -> f64 {
        self.total_locked_liquidity
    }

    pub fn market_balance(&self) -> f64 {
        self.market_balance
    }

    pub fn bad_debt(&self) -> f64 {
        self.bad_debt
    }

    pub fn ranges(&self) -> &BTreeMap<RangeKey, RangeLedger> {
        &self.ranges
    }

    pub fn range(&self, key: &RangeKey) -> Option<&RangeLedger> {
        self.ranges.get(key)
    }

    pub fn accounts(&self) -> &BTreeMap<String, AccountState> {
        &self.accounts
    }

    pub fn account(&self, id: &str) -> Result<&AccountState> {
        self.accounts
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("account `{id}`")))
    }

    pub fn positions(&self) -> &BTreeMap<u64, OpenPosition> {
        &self.positions
    }

    pub fn position(&self, id: u64) -> Result<&OpenPosition> {
        self.positions
            .get(&id)
            .ok_or_else(|| Error::NotFound(format!("position {id}")))
    }

    pub fn positions_of(&self, account: &str) -> Result<impl Iterator<Item = (&u64, &OpenPosition)>> {
        let acct = self.account(account)?;
        Ok(acct.positions.iter().map(move |id| (id, &self.positions[id])))
    }

    /// Numeraire value of one share.
    pub fn share_price(&self) -> f64 {
        if self.total_shares > 0.0 {
            self.total_liquidity / self.total_shares
        } else {
            1.0
        }
    }

    pub fn shares_value(&self, shares: f64) -> f64 {
        if self.total_shares > 0.0 {
            shares * self.total_liquidity / self.total_shares
        } else {
            0.0
        }
    }

    pub fn account_value(&self, id: &str) -> Result<f64> {
        Ok(self.shares_value(self.account(id)?.shares))
    }

    /// Notional of every open leg owned by the account.
    pub fn account_notional(&self, id: &str) -> Result<f64> {
        Ok(self.positions_of(id)?.map(|(_, p)| p.position.notional()).sum())
    }

    /// `total_liquidity + market_balance − Σ deposited`; zero up to
    /// rounding.
    pub fn conservation_residual(&self) -> f64 {
        let deposited: f64 = self.accounts.values().map(|a| a.deposited).sum();
        self.total_liquidity + self.market_balance - deposited
    }

    /// Utilization, or 1 when no liquidity is free.
    pub fn effective_utilization(&self) -> f64 {
        utilization(
            self.total_liquidity,
            self.total_notional_value,
            self.total_locked_liquidity,
        )
        .map_or(1.0, |u| u.clamp(0.0, 1.0))
    }

    /// Seller collateral ratio at the current utilization.
    pub fn seller_ratio(&self) -> Result<f64> {
        self.config.curves.collateral.eval(self.effective_utilization())
    }

    /// Rebuilds ranges, long books and aggregates from the open positions,
    /// in id order, so that closing a position restores them bit for bit.
    fn recompute(&mut self) {
        for r in self.ranges.values_mut() {
            r.sold = 0.0;
            r.bought = 0.0;
        }
        for acct in self.accounts.values_mut() {
            for book in acct.long_books.values_mut() {
                book.open = 0.0;
            }
        }
        for open in self.positions.values() {
            for (leg, entry) in open.position.legs.iter().zip(&open.legs) {
                let r = self.ranges.entry(entry.range).or_default();
                if leg.is_long {
                    r.bought += entry.notional;
                    let acct = self.accounts.get_mut(&open.owner).expect("owner exists");
                    acct.long_books
                        .entry(entry.range)
                        .or_insert(LongBook {
                            base: entry.base,
                            open: 0.0,
                        })
                        .open += entry.notional;
                } else {
                    r.sold += entry.notional;
                }
            }
        }
        self.ranges
            .retain(|_, r| r.sold != 0.0 || r.bought != 0.0 || r.fg_upper != 0.0 || r.fg_lower != 0.0);
        for r in self.ranges.values_mut() {
            r.base_liquidity = r.sold;
        }
        for acct in self.accounts.values_mut() {
            acct.long_books.retain(|_, b| b.open != 0.0);
        }
        self.total_notional_value = self.ranges.values().map(|r| r.sold).sum();
        self.total_locked_liquidity = self.ranges.values().map(|r| r.bought).sum();
    }

    fn account_mut(&mut self, id: &str) -> Result<&mut AccountState> {
        self.accounts
            .get_mut(id)
            .ok_or_else(|| Error::NotFound(format!("account `{id}`")))
    }

    /// Mints shares worth `value` to the account, funded by the market.
    fn credit_from_market(&mut self, id: &str, value: f64) -> Result<()> {
        if value == 0.0 {
            return Ok(());
        }
        let shares = self.shares_for(value)?;
        self.account_mut(id)?.shares += shares;
        self.total_shares += shares;
        self.total_liquidity += value;
        self.market_balance -= value;
        Ok(())
    }

    /// Pays `value` to the market out of the account; whatever the account
    /// cannot cover is paid by the other shareholders. Returns the unpaid
    /// remainder when the whole pool is insufficient.
    fn debit_to_market(&mut self, id: &str, value: f64) -> Result<f64> {
        if value == 0.0 {
            return Ok(0.0);
        }
        let own = self.account_value(id)?;
        let burn = if value >= own {
            self.account(id)?.shares
        } else {
            value * self.total_shares / self.total_liquidity
        };
        self.account_mut(id)?.shares -= burn;
        self.total_shares -= burn;
        let paid = value.min(self.total_liquidity);
        self.total_liquidity -= paid;
        self.market_balance += paid;
        let unpaid = value - paid;
        self.bad_debt += unpaid;
        Ok(unpaid)
    }

    /// Transfers `value` from the account to the other shareholders by
    /// burning its shares. Returns the part the account could not cover.
    fn debit_to_pool(&mut self, id: &str, value: f64) -> Result<f64> {
        if value == 0.0 {
            return Ok(0.0);
        }
        let own = self.account_value(id)?;
        let (burn, unpaid) = if value >= own {
            (self.account(id)?.shares, value - own)
        } else {
            (value * self.total_shares / self.total_liquidity, 0.0)
        };
        self.account_mut(id)?.shares -= burn;
        self.total_shares -= burn;
        self.bad_debt += unpaid;
        Ok(unpaid)
    }

    /// Income from the market shared by all shareholders.
    fn income_from_market(&mut self, value: f64) {
        self.total_liquidity += value;
        self.market_balance -= value;
    }

    fn shares_for(&self, value: f64) -> Result<f64> {
        if self.total_shares == 0.0 {
            Ok(value)
        } else if self.total_liquidity > 0.0 {
            Ok(value * self.total_shares / self.total_liquidity)
        } else {
            Err(Error::Accounting("outstanding shares have no backing liquidity".into()))
        }
    }
}
