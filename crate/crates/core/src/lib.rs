//! Quantitative mechanics of perpetual options built from relocated
//! concentrated liquidity.
//!
//! * [`instrument`] – legs, LP-backed payoffs, strategy presets and the
//!   256-bit position token.
//! * [`pricing`] – Black-Scholes theta, streaming-premium estimators, GBM
//!   paths and Monte Carlo premium statistics.
//! * [`pool`] – the liquidity ledger: deposits, mint/close lifecycle,
//!   fee-growth premium, effective liquidity and the replayable event log.
//! * [`risk`] – collateral requirements, the Cboe reference margin,
//!   pool utilization and utilization-linked curves.

pub mod error;
pub mod instrument;
pub mod numeric;
pub mod pool;
pub mod pricing;
pub mod risk;

pub use error::{Error, Result};
