//! One runner per scenario kind. Runners only compute; they return the
//! artifacts as bytes and never touch the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use panopt_core::instrument::{geometric_grid, payoff_curve, Leg, Position, Strategy, StrategyParams};
use panopt_core::pool::replay;
use panopt_core::pricing::montecarlo::DEFAULT_TICK_SPACING;
use panopt_core::pricing::{
    bs_call_price, effective_dte, implied_vol, range_for_dte, stream_premium_theta, stream_premium_tick,
    CheckpointStats, GbmParams, PremiumStats, PremiumStudy, PricePath, MINUTE_IN_YEARS,
};
use panopt_core::risk::{buyer_requirement, cboe_margin, itm_amount, seller_requirement, MarginReport};

use crate::config::{from_value, CliError, Format, Kind, Scenario};

/// A file to be written into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Inputs shared by every runner.
pub struct Context<'a> {
    pub seed: u64,
    pub format: Format,
    /// Directory that relative input paths are resolved against.
    pub base_dir: &'a Path,
}

impl Context<'_> {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn run(scenario: Scenario, ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let params = scenario.params;
    match scenario.kind {
        Kind::PremiumMc => premium_mc(from_value(params, "params")?, ctx),
        Kind::Payoff => payoff(from_value(params, "params")?, ctx),
        Kind::Margin => margin(from_value(params, "params")?),
        Kind::PoolReplay => pool_replay(from_value(params, "params")?, ctx),
        Kind::Iv => iv(from_value(params, "params")?),
        Kind::Dte => dte(from_value(params, "params")?),
    }
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

/// Rows as `<stem>.csv` or `<stem>.json` depending on the format.
fn table_artifact<T: Serialize>(stem: &str, rows: &[T], format: Format) -> Result<Artifact, CliError> {
    match format {
        Format::Json => json_artifact(&format!("{stem}.json"), &rows),
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            Ok(Artifact {
                name: format!("{stem}.csv"),
                bytes,
            })
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

// premium_mc

fn default_step_minutes() -> f64 {
    1.0
}

fn default_paths() -> usize {
    10_000
}

fn default_tick_spacing() -> f64 {
    DEFAULT_TICK_SPACING
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiumMcParams {
    pub sigma: f64,
    /// Required unless `path_csv` is given.
    #[serde(default)]
    pub s0: Option<f64>,
    #[serde(default)]
    pub horizon_days: Option<f64>,
    #[serde(default)]
    pub drift: f64,
    #[serde(default = "default_step_minutes")]
    pub step_minutes: f64,
    /// At most one of `strike` and `moneyness`; at the money by default.
    #[serde(default)]
    pub strike: Option<f64>,
    /// Strike as `s0·(1 + moneyness)`.
    #[serde(default)]
    pub moneyness: Option<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub dt_theta_minutes: Option<f64>,
    #[serde(default = "default_tick_spacing")]
    pub tick_spacing: f64,
    #[serde(default)]
    pub checkpoint_days: Vec<f64>,
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Price the premium along an external `t_years,price` path instead of
    /// simulating.
    #[serde(default)]
    pub path_csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct McSummary {
    seed: u64,
    s0: f64,
    strike: f64,
    sigma: f64,
    drift: f64,
    steps: usize,
    dt_years: f64,
    horizon_years: f64,
    bs_price: f64,
    theta: PremiumStats,
    tick: PremiumStats,
    checkpoints: Vec<CheckpointStats>,
}

#[derive(Serialize)]
struct PathSummary {
    s0: f64,
    strike: f64,
    sigma: f64,
    horizon_years: f64,
    bs_price: f64,
    theta_premium: f64,
    tick_premium: f64,
}

#[derive(Serialize)]
struct PremiumRow {
    path: usize,
    theta: f64,
    tick: f64,
}

fn strike_of(p: &PremiumMcParams, s0: f64) -> Result<f64, CliError> {
    match (p.strike, p.moneyness) {
        (Some(_), Some(_)) => Err(config_err("at `params`: give either `strike` or `moneyness`, not both")),
        (Some(k), None) => Ok(k),
        (None, Some(m)) => Ok(s0 * (1.0 + m)),
        (None, None) => Ok(s0),
    }
}

fn premium_mc(p: PremiumMcParams, ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    if !(p.step_minutes > 0.0) {
        return Err(config_err("at `params.step_minutes`: must be positive"));
    }
    let dt = p.step_minutes * MINUTE_IN_YEARS;
    let dt_theta = p.dt_theta_minutes.map(|m| m * MINUTE_IN_YEARS);
    if let Some(file) = &p.path_csv {
        if p.s0.is_some() || p.horizon_days.is_some() {
            return Err(config_err(
                "at `params`: `s0` and `horizon_days` come from the path when `path_csv` is set",
            ));
        }
        let reader = std::fs::File::open(ctx.resolve(file))
            .map_err(|e| CliError::Io(format!("cannot open {}: {e}", file.display())))?;
        let path = PricePath::from_csv(reader)?;
        let s0 = path.prices()[0];
        let strike = strike_of(&p, s0)?;
        let theta = stream_premium_theta(&path, strike, p.sigma, dt_theta.unwrap_or(dt))?;
        let tick = stream_premium_tick(&path, strike, p.sigma, p.tick_spacing)?;
        let summary = PathSummary {
            s0,
            strike,
            sigma: p.sigma,
            horizon_years: path.duration(),
            bs_price: bs_call_price(s0, strike, p.sigma, path.duration())?,
            theta_premium: theta,
            tick_premium: tick,
        };
        let rows = [PremiumRow { path: 0, theta, tick }];
        return Ok(vec![
            json_artifact("stats.json", &summary)?,
            table_artifact("premiums", &rows, ctx.format)?,
        ]);
    }

    let s0 = p.s0.ok_or_else(|| config_err("at `params.s0`: required without `path_csv`"))?;
    let days = p
        .horizon_days
        .ok_or_else(|| config_err("at `params.horizon_days`: required without `path_csv`"))?;
    let per_day = 1440.0 / p.step_minutes;
    let steps = (days * per_day).round();
    if !(steps >= 1.0) {
        return Err(config_err("at `params.horizon_days`: shorter than one step"));
    }
    let strike = strike_of(&p, s0)?;
    let gbm = GbmParams {
        s0,
        sigma: p.sigma,
        drift: p.drift,
        dt,
        steps: steps as usize,
        seed: ctx.seed,
    };
    let mut study = PremiumStudy::new(gbm.clone(), strike, p.n_paths);
    study.dt_theta = dt_theta;
    study.tick_spacing = p.tick_spacing;
    study.parallel = p.parallel;
    study.checkpoints = p.checkpoint_days.iter().map(|d| (d * per_day).round() as usize).collect();
    let out = study.run()?;
    let last = out.last().clone();
    let summary = McSummary {
        seed: ctx.seed,
        s0,
        strike,
        sigma: p.sigma,
        drift: p.drift,
        steps: gbm.steps,
        dt_years: dt,
        horizon_years: gbm.horizon(),
        bs_price: last.bs_price,
        theta: last.theta,
        tick: last.tick,
        checkpoints: out.checkpoints,
    };
    let rows: Vec<PremiumRow> = out
        .theta_premiums
        .iter()
        .zip(&out.tick_premiums)
        .enumerate()
        .map(|(path, (&theta, &tick))| PremiumRow { path, theta, tick })
        .collect();
    Ok(vec![
        json_artifact("stats.json", &summary)?,
        table_artifact("premiums", &rows, ctx.format)?,
    ])
}

// payoff

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub name: Strategy,
    pub spot: f64,
    #[serde(default)]
    pub params: StrategyParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffParams {
    /// Exactly one of `position` and `strategy`.
    #[serde(default)]
    pub position: Option<Position>,
    #[serde(default)]
    pub strategy: Option<StrategySpec>,
    /// Defaults to the strategy spot.
    #[serde(default)]
    pub entry_spot: Option<f64>,
    pub grid: GridSpec,
}

#[derive(Serialize)]
struct PayoffRow {
    price: f64,
    profit: f64,
}

fn payoff(p: PayoffParams, ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let (position, default_entry) = match (p.position, p.strategy) {
        (Some(pos), None) => (pos, None),
        (None, Some(s)) => (s.name.build(s.spot, &s.params)?, Some(s.spot)),
        _ => return Err(config_err("at `params`: give exactly one of `position` and `strategy`")),
    };
    let entry = p
        .entry_spot
        .or(default_entry)
        .ok_or_else(|| config_err("at `params.entry_spot`: required with an explicit position"))?;
    let grid = geometric_grid(p.grid.lo, p.grid.hi, p.grid.n)?;
    let rows: Vec<PayoffRow> = payoff_curve(&position, &grid, entry)?
        .into_iter()
        .map(|(price, profit)| PayoffRow { price, profit })
        .collect();
    Ok(vec![table_artifact("payoff", &rows, ctx.format)?])
}

// margin

fn default_seller_ratio() -> f64 {
    panopt_core::risk::DEFAULT_SELLER_RATIO
}

fn default_buyer_ratio() -> f64 {
    panopt_core::risk::DEFAULT_BUYER_RATIO
}

fn default_multiplier() -> f64 {
    100.0
}

/// Notional and ITM amount, given directly or through a leg and a spot.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exposure {
    #[serde(default)]
    pub notional: Option<f64>,
    #[serde(default)]
    pub itm: Option<f64>,
    #[serde(default)]
    pub leg: Option<Leg>,
    #[serde(default)]
    pub spot: Option<f64>,
}

impl Exposure {
    fn resolve(&self) -> Result<(f64, f64), CliError> {
        match (&self.leg, self.notional) {
            (Some(leg), None) if self.itm.is_none() => {
                let spot = self
                    .spot
                    .ok_or_else(|| config_err("at `params.spot`: required with `leg`"))?;
                leg.validate()?;
                Ok((leg.notional(), itm_amount(leg, spot)?))
            }
            (None, Some(n)) if self.spot.is_none() => Ok((n, self.itm.unwrap_or(0.0))),
            _ => Err(config_err(
                "at `params`: give either `notional` (and `itm`) or `leg` and `spot`",
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginParams {
    Seller {
        #[serde(flatten)]
        exposure: Exposure,
        #[serde(default)]
        premium_accrued: f64,
        #[serde(default = "default_seller_ratio")]
        base_ratio: f64,
    },
    Buyer {
        #[serde(flatten)]
        exposure: Exposure,
        #[serde(default)]
        premium_accrued: f64,
        #[serde(default = "default_buyer_ratio")]
        base_ratio: f64,
    },
    Cboe {
        premium: f64,
        spot: f64,
        strike: f64,
        is_put: bool,
        #[serde(default = "default_multiplier")]
        multiplier: f64,
    },
}

#[derive(Serialize)]
struct MarginOut {
    model: &'static str,
    requirement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<MarginReport>,
}

fn margin(p: MarginParams) -> Result<Vec<Artifact>, CliError> {
    let out = match p {
        MarginParams::Seller {
            exposure,
            premium_accrued,
            base_ratio,
        } => {
            let (n, itm) = exposure.resolve()?;
            let r = seller_requirement(n, itm, premium_accrued, base_ratio)?;
            MarginOut {
                model: "seller",
                requirement: r.requirement,
                report: Some(r),
            }
        }
        MarginParams::Buyer {
            exposure,
            premium_accrued,
            base_ratio,
        } => {
            let (n, itm) = exposure.resolve()?;
            let r = buyer_requirement(n, itm, premium_accrued, base_ratio)?;
            MarginOut {
                model: "buyer",
                requirement: r.requirement,
                report: Some(r),
            }
        }
        MarginParams::Cboe {
            premium,
            spot,
            strike,
            is_put,
            multiplier,
        } => MarginOut {
            model: "cboe",
            requirement: cboe_margin(premium, spot, strike, is_put, multiplier)?,
            report: None,
        },
    };
    Ok(vec![json_artifact("margin.json", &out)?])
}

// pool_replay

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayParams {
    pub event_log: PathBuf,
}

fn pool_replay(p: ReplayParams, ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let file = std::fs::File::open(ctx.resolve(&p.event_log))
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", p.event_log.display())))?;
    let (state, steps) = replay(std::io::BufReader::new(file))?;
    Ok(vec![
        json_artifact("snapshot.json", &state)?,
        table_artifact("utilization", &steps, ctx.format)?,
    ])
}

// iv and dte

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvParams {
    pub fee_rate: f64,
    pub volume: f64,
    pub tick_liquidity: f64,
}

#[derive(Serialize)]
struct IvOut {
    implied_vol: f64,
}

fn iv(p: IvParams) -> Result<Vec<Artifact>, CliError> {
    let implied_vol = implied_vol(p.fee_rate, p.volume, p.tick_liquidity)?;
    Ok(vec![json_artifact("iv.json", &IvOut { implied_vol })?])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DteParams {
    pub sigma: f64,
    /// Exactly one of `range_factor` and `dte_days`.
    #[serde(default)]
    pub range_factor: Option<f64>,
    #[serde(default)]
    pub dte_days: Option<f64>,
}

#[derive(Serialize)]
struct DteOut {
    sigma: f64,
    range_factor: f64,
    effective_dte_years: f64,
    effective_dte_days: f64,
}

fn dte(p: DteParams) -> Result<Vec<Artifact>, CliError> {
    let (r, years) = match (p.range_factor, p.dte_days) {
        (Some(r), None) => (r, effective_dte(r, p.sigma)?),
        (None, Some(d)) => {
            let years = d / 365.0;
            (range_for_dte(years, p.sigma)?, years)
        }
        _ => return Err(config_err("at `params`: give exactly one of `range_factor` and `dte_days`")),
    };
    let out = DteOut {
        sigma: p.sigma,
        range_factor: r,
        effective_dte_years: years,
        effective_dte_days: years * 365.0,
    };
    Ok(vec![json_artifact("dte.json", &out)?])
}

