use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// One minute as a fraction of a 365-day year.
pub const MINUTE_IN_YEARS: f64 = 1.0 / 525_600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    /// Volatility per √year.
    pub sigma: f64,
    /// Per-year drift of the price (zero under the zero-rate measure).
    #[serde(default)]
    pub drift: f64,
    /// Step length in years.
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    MINUTE_IN_YEARS
}

impl GbmParams {
    /// Driftless minute-step paths covering `days`.
    pub fn minutely(s0: f64, sigma: f64, days: f64, seed: u64) -> Self {
        Self {
            s0,
            sigma,
            drift: 0.0,
            dt: MINUTE_IN_YEARS,
            steps: (days * 1440.0).round() as usize,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("s0", self.s0)?;
        ensure_positive("sigma", self.sigma)?;
        ensure_positive("dt", self.dt)?;
        if !self.drift.is_finite() {
            return Err(Error::domain("drift must be finite"));
        }
        if self.steps == 0 {
            return Err(Error::domain("steps must be positive"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub(crate) fn stepper(&self, seed: u64) -> GbmStepper {
        GbmStepper {
            price: self.s0,
            log_drift: (self.drift - 0.5 * self.sigma * self.sigma) * self.dt,
            log_vol: self.sigma * self.dt.sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Exact log-normal stepping; the price after each call to `advance`.
pub(crate) struct GbmStepper {
    price: f64,
    log_drift: f64,
    log_vol: f64,
    rng: ChaCha8Rng,
}

impl GbmStepper {
    #[inline]
    pub(crate) fn price(&self) -> f64 {
        self.price
    }

    #[inline]
    pub(crate) fn advance(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.price *= (self.log_drift + self.log_vol * z).exp();
        self.price
    }
}

/// Simulates one path seeded by `params.seed`; `steps + 1` points.
pub fn simulate_gbm(params: &GbmParams) -> Result<PricePath> {
    params.validate()?;
    let mut stepper = params.stepper(params.seed);
    let mut t = Vec::with_capacity(params.steps + 1);
    let mut s = Vec::with_capacity(params.steps + 1);
    t.push(0.0);
    s.push(stepper.price());
    for i in 1..=params.steps {
        t.push(i as f64 * params.dt);
        s.push(stepper.advance());
    }
    Ok(PricePath { t, s })
}

/// Timestamped prices; times in years, strictly increasing from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    t: Vec<f64>,
    s: Vec<f64>,
}

impl PricePath {
    pub fn new(t: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if t.len() != s.len() {
            return Err(Error::domain(format!(
                "path has {} times but {} prices",
                t.len(),
                s.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::domain("path needs at least two points"));
        }
        if t[0] != 0.0 {
            return Err(Error::domain(format!("path must start at t = 0, got {}", t[0])));
        }
        if let Some(w) = t.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!("times not strictly increasing at {}", w[1])));
        }
        if let Some(p) = s.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::domain(format!("non-positive price {p}")));
        }
        Ok(Self { t, s })
    }

    /// Constant price `s` sampled every `dt` for `steps` steps.
    pub fn constant(s: f64, dt: f64, steps: usize) -> Result<Self> {
        ensure_positive("dt", dt)?;
        Self::new((0..=steps).map(|i| i as f64 * dt).collect(), vec![s; steps + 1])
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn prices(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// `(price at step start, step length)` pairs.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t
            .windows(2)
            .zip(&self.s)
            .map(|(w, &s)| (s, w[1] - w[0]))
    }

    /// Appends `other`, whose first point must coincide with this path's
    /// last price; its times are shifted to continue this path.
    pub fn concat(&self, other: &PricePath) -> Result<PricePath> {
        let last = self.s[self.s.len() - 1];
        if other.s[0] != last {
            return Err(Error::domain(format!(
                "cannot join paths: {last} then {}",
                other.s[0]
            )));
        }
        let offset = self.duration();
        let mut t = self.t.clone();
        let mut s = self.s.clone();
        t.extend(other.t[1..].iter().map(|x| x + offset));
        s.extend_from_slice(&other.s[1..]);
        PricePath::new(t, s)
    }

    /// Reads a `t_years,price` CSV with header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_years", "price"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `t_years,price`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let (mut t, mut s) = (Vec::new(), Vec::new());
        for (i, record) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let (ti, si) = record.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            t.push(ti);
            s.push(si);
        }
        PricePath::new(t, s)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t_years", "price"]).map_err(csv_err)?;
        for (t, s) in self.t.iter().zip(&self.s) {
            wtr.write_record([t.to_string(), s.to_string()]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line() as usize,
            message: e.to_string(),
        },
        None => Error::Io(e.to_string()),
    }
}
