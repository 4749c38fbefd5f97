//! Ledger operations. Each one works on a copy of the state and commits
//! only when it succeeds.

use serde::{Deserialize, Serialize};

use super::{total_fees, FeeGrowthInputs, LegEntry, OpenPosition, PoolState, RangeKey, RangeLedger};
use crate::error::{ensure_positive, Error, Result};
use crate::instrument::{payoff, Position, PositionToken};
use crate::risk::account_solvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MintReceipt {
    pub position_id: u64,
    pub token: PositionToken,
    pub amount: f64,
    pub commission: f64,
}

/// Cash flows of a close, all in numeraire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub position_id: u64,
    /// Fees paid to the seller, net of spread.
    pub premium_received: f64,
    /// Seller spread retained by the pool.
    pub spread_to_pool: f64,
    /// Premium the buyer paid to the pool, spread included.
    pub premium_paid: f64,
    /// Owner's profit on the relocated liquidity, settled with the market.
    pub exercise_pnl: f64,
    /// Premium the owner could not cover.
    pub unpaid_premium: f64,
    /// Exercise loss the whole pool could not cover.
    pub unpaid_exercise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegPremium {
    pub total_fees: f64,
    pub factor: f64,
    /// `total_fees · factor`.
    pub gross: f64,
    pub spread: f64,
    /// Seller payout `gross·(1 − spread)` or buyer cost `gross·(1 + spread)`.
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumQuote {
    pub legs: Vec<LegPremium>,
    /// Net premium owed by the owner on long legs.
    pub paid: f64,
    /// Net premium due to the owner on short legs.
    pub received: f64,
}

/// Premium accrued by an open position at the current fee-growth marks.
pub fn premium_owed(state: &PoolState, position_id: u64) -> Result<PremiumQuote> {
    let open = state.position(position_id)?;
    let owner = state.account(&open.owner)?;
    let mut legs = Vec::with_capacity(open.legs.len());
    let (mut paid, mut received) = (0.0, 0.0);
    for (leg, entry) in open.position.legs.iter().zip(&open.legs) {
        let range = state
            .range(&entry.range)
            .ok_or_else(|| Error::Accounting(format!("range {} missing", entry.range)))?;
        let fees = total_fees(&FeeGrowthInputs {
            fg_upper: range.fg_upper,
            fg_lower: range.fg_lower,
            fg_inside_last: entry.fg_entry,
            liquidity: range.deployed().max(0.0),
        })?;
        let n = entry.notional;
        let p = if leg.is_long {
            let book = owner
                .long_books
                .get(&entry.range)
                .ok_or_else(|| Error::Accounting(format!("no long book for range {}", entry.range)))?;
            let free = entry.base - book.open;
            if !(free > 0.0) {
                return Err(Error::DrainedLiquidity {
                    size: book.open,
                    base: entry.base,
                });
            }
            let factor = n / free;
            let gross = fees * factor;
            let net = gross * (1.0 + entry.spread);
            paid += net;
            LegPremium {
                total_fees: fees,
                factor,
                gross,
                spread: entry.spread,
                net,
            }
        } else {
            let factor = n / (entry.base + n);
            let gross = fees * factor;
            let net = gross * (1.0 - entry.spread);
            received += net;
            LegPremium {
                total_fees: fees,
                factor,
                gross,
                spread: entry.spread,
                net,
            }
        };
        legs.push(p);
    }
    Ok(PremiumQuote { legs, paid, received })
}

fn ensure_spot(spot: f64) -> Result<f64> {
    ensure_positive("spot", spot)
}

impl PoolState {
    /// Deposits `amount` numeraire; returns the shares minted. New accounts
    /// are created on their first deposit.
    pub fn deposit(&mut self, account: &str, amount: f64) -> Result<f64> {
        ensure_positive("deposit amount", amount)?;
        let shares = self.shares_for(amount)?;
        let acct = self.accounts.entry(account.to_string()).or_default();
        acct.shares += shares;
        acct.deposited += amount;
        self.total_shares += shares;
        self.total_liquidity += amount;
        Ok(shares)
    }

    /// Burns `shares` and returns their numeraire value. Only liquidity not
    /// deployed by sellers can leave, and the account must stay solvent at
    /// `spot` (ignored when it has no open positions).
    pub fn withdraw(&mut self, account: &str, shares: f64, spot: Option<f64>) -> Result<f64> {
        ensure_positive("shares", shares)?;
        let owned = self.account(account)?.shares;
        if shares > owned {
            return Err(Error::domain(format!(
                "account `{account}` owns {owned} shares, cannot withdraw {shares}"
            )));
        }
        let value = self.shares_value(shares);
        let free = self.total_liquidity - self.total_notional_value;
        if value > free {
            return Err(Error::LockedLiquidity { requested: value, free });
        }
        let mut next = self.clone();
        {
            let acct = next.account_mut(account)?;
            acct.shares -= shares;
            acct.deposited -= value;
        }
        next.total_shares -= shares;
        next.total_liquidity -= value;
        if !next.account(account)?.positions.is_empty() {
            let spot = spot.ok_or_else(|| {
                Error::domain("a spot price is needed to withdraw from an account with open positions")
            })?;
            next.require_solvent(account, ensure_spot(spot)?)?;
        }
        *self = next;
        Ok(value)
    }

    /// Mints a position whose legs are all short.
    pub fn mint_short(&mut self, account: &str, position: &Position, spot: f64) -> Result<MintReceipt> {
        if position.legs.iter().any(|l| l.is_long) {
            return Err(Error::domain("mint_short needs short legs only"));
        }
        self.mint(account, position, spot)
    }

    /// Mints a position whose legs are all long.
    pub fn mint_long(&mut self, account: &str, position: &Position, spot: f64) -> Result<MintReceipt> {
        if position.legs.iter().any(|l| !l.is_long) {
            return Err(Error::domain("mint_long needs long legs only"));
        }
        self.mint(account, position, spot)
    }

    /// Mints a position of short and/or long legs for `account`.
    pub fn mint(&mut self, account: &str, position: &Position, spot: f64) -> Result<MintReceipt> {
        ensure_spot(spot)?;
        position.validate()?;
        self.account(account)?;
        let (token, amount) = position.to_token(self.config.pool_id)?;
        let mut next = self.clone();

        let mut entries = Vec::with_capacity(position.legs.len());
        for leg in &position.legs {
            let key = RangeKey::of(leg)?;
            let n = leg.notional();
            if !(n > 0.0) {
                return Err(Error::domain("every leg needs a positive notional"));
            }
            let range = next.ranges.entry(key).or_insert_with(RangeLedger::default);
            let fg_entry = range.fg_inside();
            range.fg_inside_last = fg_entry;
            let entry = if leg.is_long {
                let available = range.sold - range.bought;
                if n > available {
                    return Err(Error::Availability {
                        requested: n,
                        available,
                    });
                }
                let book = next.accounts[account].long_books.get(&key);
                let base = book.map_or(range.base_liquidity, |b| b.base);
                let total = book.map_or(0.0, |b| b.open) + n;
                if total >= base {
                    return Err(Error::DrainedLiquidity { size: total, base });
                }
                range.bought += n;
                let acct = next.accounts.get_mut(account).expect("checked above");
                acct.long_books
                    .entry(key)
                    .or_insert(super::LongBook { base, open: 0.0 })
                    .open += n;
                LegEntry {
                    range: key,
                    notional: n,
                    fg_entry,
                    base,
                    spread: n / base,
                }
            } else {
                let otm = if leg.is_put {
                    leg.strike < spot
                } else {
                    leg.strike > spot
                };
                if !otm {
                    return Err(Error::Moneyness(format!(
                        "short {} at strike {} must be out of the money at spot {spot}",
                        if leg.is_put { "put" } else { "call" },
                        leg.strike
                    )));
                }
                let base = range.base_liquidity;
                range.sold += n;
                range.base_liquidity += n;
                LegEntry {
                    range: key,
                    notional: n,
                    fg_entry,
                    base,
                    spread: if base > 0.0 { (n / base).min(1.0) } else { 0.0 },
                }
            };
            entries.push(entry);
        }

        let id = next.next_position_id;
        next.next_position_id += 1;
        next.positions.insert(
            id,
            OpenPosition {
                owner: account.to_string(),
                token,
                amount,
                position: position.clone(),
                entry_spot: spot,
                legs: entries,
            },
        );
        next.account_mut(account)?.positions.insert(id);
        next.recompute();

        if next.total_notional_value > next.total_liquidity {
            return Err(Error::Liquidity(format!(
                "notional {} would exceed pool liquidity {}",
                next.total_notional_value, next.total_liquidity
            )));
        }

        let commission = next.commission_for(account, position)?;
        let value = next.account_value(account)?;
        if commission > value {
            return Err(Error::Margin {
                account: account.to_string(),
                shortfall: commission - value,
            });
        }
        next.debit_to_pool(account, commission)?;
        next.require_solvent(account, spot)?;
        *self = next;
        Ok(MintReceipt {
            position_id: id,
            token,
            amount,
            commission,
        })
    }

    /// Commission on a new position; short legs are exempt while the
    /// account's collateral covers the notional of all its positions.
    fn commission_for(&self, account: &str, position: &Position) -> Result<f64> {
        let rate = self.config.commission_rate;
        let waived = self.account_value(account)? >= self.account_notional(account)?;
        Ok(position
            .legs
            .iter()
            .filter(|l| l.is_long || !waived)
            .map(|l| rate * l.notional())
            .sum())
    }

    fn require_solvent(&self, account: &str, spot: f64) -> Result<()> {
        let s = account_solvent(self, account, spot)?;
        if s.solvent {
            Ok(())
        } else {
            Err(Error::Margin {
                account: account.to_string(),
                shortfall: s.shortfall,
            })
        }
    }

    /// Closes a position at `spot`. Anyone other than the owner needs
    /// `force`, must hold pool shares, and may only close all-long
    /// positions that are far out of the money.
    pub fn close_position(&mut self, caller: &str, position_id: u64, spot: f64, force: bool) -> Result<Settlement> {
        ensure_spot(spot)?;
        let open = self.position(position_id)?.clone();
        if caller != open.owner {
            self.check_forced_close(caller, &open, spot, force)?;
        }
        let quote = premium_owed(self, position_id)?;
        let exercise_pnl = payoff(&open.position, spot, open.entry_spot)?;

        let mut next = self.clone();
        next.positions.remove(&position_id);
        next.account_mut(&open.owner)?.positions.remove(&position_id);
        next.recompute();
        for entry in &open.legs {
            if let Some(r) = next.ranges.get_mut(&entry.range) {
                if r.sold < r.bought {
                    return Err(Error::Liquidity(format!(
                        "range {} would have {} sold against {} bought",
                        entry.range, r.sold, r.bought
                    )));
                }
                r.fg_inside_last = r.fg_inside();
            }
        }

        let owner = open.owner.as_str();
        let spread_to_pool: f64 = open
            .position
            .legs
            .iter()
            .zip(&quote.legs)
            .filter(|(l, _)| !l.is_long)
            .map(|(_, p)| p.gross - p.net)
            .sum();
        next.income_from_market(spread_to_pool);
        next.credit_from_market(owner, quote.received)?;
        if exercise_pnl > 0.0 {
            next.credit_from_market(owner, exercise_pnl)?;
        }
        let unpaid_premium = next.debit_to_pool(owner, quote.paid)?;
        let unpaid_exercise = if exercise_pnl < 0.0 {
            next.debit_to_market(owner, -exercise_pnl)?
        } else {
            0.0
        };
        *self = next;
        Ok(Settlement {
            position_id,
            premium_received: quote.received,
            spread_to_pool,
            premium_paid: quote.paid,
            exercise_pnl,
            unpaid_premium,
            unpaid_exercise,
        })
    }

    fn check_forced_close(&self, caller: &str, open: &OpenPosition, spot: f64, force: bool) -> Result<()> {
        let denied = || Error::Authorization {
            caller: caller.to_string(),
            owner: open.owner.clone(),
        };
        if !force || self.accounts.get(caller).is_none_or(|a| a.shares <= 0.0) {
            return Err(denied());
        }
        let w = self.config.force_close_widths;
        let far_otm = open.position.legs.iter().all(|leg| {
            let r = leg.effective_range_factor();
            let reach = r.powf(1.0 + 2.0 * w);
            leg.is_long
                && if leg.is_put {
                    spot >= leg.strike * reach
                } else {
                    spot <= leg.strike / reach
                }
        });
        if far_otm {
            Ok(())
        } else {
            Err(denied())
        }
    }

    /// Sets the fee-growth marks of a range. Inside growth may not fall.
    pub fn set_fee_growth(&mut self, range: RangeKey, fg_upper: f64, fg_lower: f64) -> Result<()> {
        if !(fg_upper.is_finite() && fg_lower.is_finite()) {
            return Err(Error::domain("fee growth must be finite"));
        }
        let prev = self.ranges.get(&range).map_or(0.0, RangeLedger::fg_inside);
        let inside = fg_upper - fg_lower;
        if inside < prev {
            return Err(Error::Accounting(format!(
                "inside fee growth of {range} would fall from {prev} to {inside}"
            )));
        }
        let r = self.ranges.entry(range).or_default();
        r.fg_upper = fg_upper;
        r.fg_lower = fg_lower;
        Ok(())
    }
}
