use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported strategy `{0}`")]
    UnsupportedStrategy(String),

    #[error("capacity exceeded: {legs} legs (max 4)")]
    Capacity { legs: usize },

    #[error("encoding range: {0}")]
    EncodingRange(String),

    #[error("malformed token: {0}")]
    MalformedToken(String),

    #[error("moneyness: {0}")]
    Moneyness(String),

    #[error("insufficient collateral for `{account}`: shortfall {shortfall}")]
    Margin { account: String, shortfall: f64 },

    #[error("insufficient pool liquidity: {0}")]
    Liquidity(String),

    #[error("not enough sold liquidity to buy: requested {requested}, available {available}")]
    Availability { requested: f64, available: f64 },

    #[error("purchase would drain the range: size {size} vs base {base}")]
    DrainedLiquidity { size: f64, base: f64 },

    #[error("liquidity is locked by open positions: requested {requested}, free {free}")]
    LockedLiquidity { requested: f64, free: f64 },

    #[error("accounting error: {0}")]
    Accounting(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("`{caller}` is not authorized to close position owned by `{owner}`")]
    Authorization { caller: String, owner: String },

    #[error("degenerate pool: total liquidity {total} does not exceed notional {notional}")]
    DegeneratePool { total: f64, notional: f64 },

    #[error("utilization curves never cross")]
    NoTarget,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Rejects NaN and non-positive values.
pub(crate) fn ensure_positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn ensure_non_negative(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be non-negative and finite, got {v}")))
    }
}
