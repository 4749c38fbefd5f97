//! JSON-lines event log and replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{MintReceipt, PoolConfig, PoolState, RangeKey, Settlement};
use crate::error::{Error, Result};
use crate::instrument::Position;
use crate::risk::pool_utilization;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// Replaces the configuration of a pool that has seen no activity.
    Init {
        config: PoolConfig,
    },
    Deposit {
        account: String,
        amount: f64,
    },
    Withdraw {
        account: String,
        shares: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spot: Option<f64>,
    },
    Mint {
        account: String,
        position: Position,
        spot: f64,
    },
    MintShort {
        account: String,
        position: Position,
        spot: f64,
    },
    MintLong {
        account: String,
        position: Position,
        spot: f64,
    },
    Close {
        caller: String,
        position_id: u64,
        spot: f64,
        #[serde(default)]
        force: bool,
    },
    FeeGrowth {
        range: RangeKey,
        upper: f64,
        lower: f64,
    },
}

impl Event {
    pub fn op(&self) -> &'static str {
        match self {
            Event::Init { .. } => "init",
            Event::Deposit { .. } => "deposit",
            Event::Withdraw { .. } => "withdraw",
            Event::Mint { .. } => "mint",
            Event::MintShort { .. } => "mint_short",
            Event::MintLong { .. } => "mint_long",
            Event::Close { .. } => "close",
            Event::FeeGrowth { .. } => "fee_growth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Outcome {
    Init,
    Deposit { shares: f64 },
    Withdraw { value: f64 },
    Mint(MintReceipt),
    Close(Settlement),
    FeeGrowth,
}

impl PoolState {
    /// Applies one event; the state is unchanged on error.
    pub fn apply(&mut self, event: &Event) -> Result<Outcome> {
        match event {
            Event::Init { config } => {
                if !self.accounts.is_empty() || !self.ranges.is_empty() {
                    return Err(Error::Accounting("init after pool activity".into()));
                }
                *self = PoolState::new(config.clone())?;
                Ok(Outcome::Init)
            }
            Event::Deposit { account, amount } => Ok(Outcome::Deposit {
                shares: self.deposit(account, *amount)?,
            }),
            Event::Withdraw { account, shares, spot } => Ok(Outcome::Withdraw {
                value: self.withdraw(account, *shares, *spot)?,
            }),
            Event::Mint { account, position, spot } => Ok(Outcome::Mint(self.mint(account, position, *spot)?)),
            Event::MintShort { account, position, spot } => {
                Ok(Outcome::Mint(self.mint_short(account, position, *spot)?))
            }
            Event::MintLong { account, position, spot } => {
                Ok(Outcome::Mint(self.mint_long(account, position, *spot)?))
            }
            Event::Close {
                caller,
                position_id,
                spot,
                force,
            } => Ok(Outcome::Close(self.close_position(caller, *position_id, *spot, *force)?)),
            Event::FeeGrowth { range, upper, lower } => {
                self.set_fee_growth(*range, *upper, *lower)?;
                Ok(Outcome::FeeGrowth)
            }
        }
    }
}

/// Aggregates after one replayed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub op: String,
    pub total_liquidity: f64,
    pub total_notional_value: f64,
    pub total_locked_liquidity: f64,
    /// `None` while no liquidity is free.
    pub utilization: Option<f64>,
}

impl StepRecord {
    fn of(step: usize, op: &str, state: &PoolState) -> Self {
        Self {
            step,
            op: op.to_string(),
            total_liquidity: state.total_liquidity(),
            total_notional_value: state.total_notional_value(),
            total_locked_liquidity: state.total_locked_liquidity(),
            utilization: pool_utilization(state).ok(),
        }
    }
}

/// A pool that records every successful event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Journal {
    pub state: PoolState,
    pub events: Vec<Event>,
}

impl Journal {
    pub fn new(config: PoolConfig) -> Result<Self> {
        let init = Event::Init { config };
        let mut j = Journal::default();
        j.apply(init)?;
        Ok(j)
    }

    pub fn apply(&mut self, event: Event) -> Result<Outcome> {
        let out = self.state.apply(&event)?;
        self.events.push(event);
        Ok(out)
    }

    pub fn write_log<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(|e| Error::Io(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn log_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_log(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// Replays a JSON-lines event log from an empty default pool. Blank lines
/// are skipped. Errors name the 1-based line.
pub fn replay<R: BufRead>(reader: R) -> Result<(PoolState, Vec<StepRecord>)> {
    let mut state = PoolState::default();
    let mut steps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        state
            .apply(&event)
            .map_err(|e| Error::Accounting(format!("line {line_no}: {e}")))?;
        steps.push(StepRecord::of(steps.len() + 1, event.op(), &state));
    }
    Ok((state, steps))
}

pub fn replay_str(log: &str) -> Result<(PoolState, Vec<StepRecord>)> {
    replay(log.as_bytes())
}
