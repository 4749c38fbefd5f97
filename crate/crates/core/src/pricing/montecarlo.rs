//! Monte Carlo distribution of streaming premiums over GBM paths.
//!
//! Every path draws from its own generator seeded by [`path_seed`], so a
//! path's premium depends only on `(seed, index)`. Per-path results are
//! collected in index order and reduced sequentially, which makes parallel
//! and sequential runs bit-identical.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::premium::{validate_tick_spacing, ThetaAccumulator, TickAccumulator};
use super::{bs_call_price, GbmParams, PricePath};
use crate::error::{ensure_positive, Error, Result};
use crate::numeric::{compensated_sum, splitmix64};

/// Default tick spacing for the tick estimator.
pub const DEFAULT_TICK_SPACING: f64 = crate::instrument::DEFAULT_TICK_SPACING;

/// Relative threshold below which a theta-estimator premium counts as zero.
pub const THETA_ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Theta,
    Tick,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Estimator::Theta),
            "tick" => Ok(Estimator::Tick),
            other => Err(Error::domain(format!("unknown estimator `{other}` (expected theta or tick)"))),
        }
    }
}

/// Generator seed of path `index` under master seed `seed`.
pub fn path_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// The path that Monte Carlo path `index` follows under `params`.
pub fn mc_path(params: &GbmParams, index: u64) -> Result<PricePath> {
    super::simulate_gbm(&GbmParams {
        seed: path_seed(params.seed, index),
        ..params.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single path).
    pub std: f64,
    /// `std / mean`, or 0 when the mean is 0.
    pub cv: f64,
    pub frac_zero: f64,
    /// Fraction of paths paying at least twice the BS price. 0 when the BS
    /// price itself is 0.
    pub frac_ge_2bs: f64,
    pub bs_price: f64,
    pub n_paths: usize,
}

impl PremiumStats {
    /// Summary of per-path premiums. A premium counts as zero when it is
    /// `<= zero_threshold`.
    pub fn from_premiums(premiums: &[f64], bs_price: f64, zero_threshold: f64) -> Result<Self> {
        let n = premiums.len();
        if n == 0 {
            return Err(Error::domain("no premiums to summarize"));
        }
        let nf = n as f64;
        let mean = compensated_sum(premiums.iter().copied()) / nf;
        let std = if n > 1 {
            let ss = compensated_sum(premiums.iter().map(|p| (p - mean) * (p - mean)));
            (ss / (nf - 1.0)).sqrt()
        } else {
            0.0
        };
        let cv = if mean > 0.0 { std / mean } else { 0.0 };
        let zeros = premiums.iter().filter(|&&p| p <= zero_threshold).count();
        let big = if bs_price > 0.0 {
            premiums.iter().filter(|&&p| p >= 2.0 * bs_price).count()
        } else {
            0
        };
        Ok(Self {
            mean,
            std,
            cv,
            frac_zero: zeros as f64 / nf,
            frac_ge_2bs: big as f64 / nf,
            bs_price,
            n_paths: n,
        })
    }
}

/// Statistics of both estimators after `step` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub step: usize,
    /// Elapsed time in years.
    pub horizon: f64,
    pub bs_price: f64,
    pub theta: PremiumStats,
    pub tick: PremiumStats,
}

/// A Monte Carlo experiment measuring both estimators on shared paths,
/// optionally at intermediate horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumStudy {
    pub gbm: GbmParams,
    pub strike: f64,
    pub n_paths: usize,
    /// Residual time in theta; defaults to the step length.
    #[serde(default)]
    pub dt_theta: Option<f64>,
    #[serde(default = "default_tick_spacing")]
    pub tick_spacing: f64,
    /// Step counts at which statistics are taken; the final step is always
    /// included.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_tick_spacing() -> f64 {
    DEFAULT_TICK_SPACING
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub checkpoints: Vec<CheckpointStats>,
    /// Per-path theta-estimator premiums at the final step.
    pub theta_premiums: Vec<f64>,
    /// Per-path tick-estimator premiums at the final step.
    pub tick_premiums: Vec<f64>,
}

impl StudyOutcome {
    pub fn last(&self) -> &CheckpointStats {
        self.checkpoints.last().expect("a study always has a final checkpoint")
    }
}

impl PremiumStudy {
    pub fn new(gbm: GbmParams, strike: f64, n_paths: usize) -> Self {
        Self {
            gbm,
            strike,
            n_paths,
            dt_theta: None,
            tick_spacing: DEFAULT_TICK_SPACING,
            checkpoints: Vec::new(),
            parallel: true,
        }
    }

    fn validate(&self) -> Result<Vec<usize>> {
        self.gbm.validate()?;
        ensure_positive("strike", self.strike)?;
        if self.n_paths == 0 {
            return Err(Error::domain("n_paths must be at least 1"));
        }
        if let Some(dt) = self.dt_theta {
            ensure_positive("dt_theta", dt)?;
        }
        validate_tick_spacing(self.tick_spacing)?;
        let mut steps = self.checkpoints.clone();
        if let Some(&bad) = steps.iter().find(|&&s| s == 0 || s > self.gbm.steps) {
            return Err(Error::domain(format!(
                "checkpoint {bad} outside 1..={}",
                self.gbm.steps
            )));
        }
        steps.push(self.gbm.steps);
        steps.sort_unstable();
        steps.dedup();
        Ok(steps)
    }

    pub fn run(&self) -> Result<StudyOutcome> {
        let checkpoints = self.validate()?;
        let per_path = self.premiums(&checkpoints, true, true);
        let mut out = Vec::with_capacity(checkpoints.len());
        for (c, &step) in checkpoints.iter().enumerate() {
            let horizon = step as f64 * self.gbm.dt;
            let bs = bs_call_price(self.gbm.s0, self.strike, self.gbm.sigma, horizon)?;
            let theta: Vec<f64> = per_path.iter().map(|p| p[c].0).collect();
            let tick: Vec<f64> = per_path.iter().map(|p| p[c].1).collect();
            out.push(CheckpointStats {
                step,
                horizon,
                bs_price: bs,
                theta: PremiumStats::from_premiums(&theta, bs, THETA_ZERO_THRESHOLD * bs)?,
                tick: PremiumStats::from_premiums(&tick, bs, 0.0)?,
            });
        }
        let last = checkpoints.len() - 1;
        Ok(StudyOutcome {
            checkpoints: out,
            theta_premiums: per_path.iter().map(|p| p[last].0).collect(),
            tick_premiums: per_path.iter().map(|p| p[last].1).collect(),
        })
    }

    /// Final-step premiums of one estimator, in path order.
    pub fn premiums_for(&self, estimator: Estimator) -> Result<Vec<f64>> {
        let checkpoints = self.validate()?;
        let theta = estimator == Estimator::Theta;
        let per_path = self.premiums(&checkpoints[checkpoints.len() - 1..], theta, !theta);
        Ok(per_path
            .into_iter()
            .map(|p| if theta { p[0].0 } else { p[0].1 })
            .collect())
    }

    fn premiums(&self, checkpoints: &[usize], theta: bool, tick: bool) -> Vec<Vec<(f64, f64)>> {
        let run = |i: usize| self.path_premiums(i as u64, checkpoints, theta, tick);
        if self.parallel {
            (0..self.n_paths).into_par_iter().map(run).collect()
        } else {
            (0..self.n_paths).map(run).collect()
        }
    }

    fn path_premiums(&self, index: u64, checkpoints: &[usize], theta: bool, tick: bool) -> Vec<(f64, f64)> {
        let gbm = &self.gbm;
        let mut stepper = gbm.stepper(path_seed(gbm.seed, index));
        let dt_theta = self.dt_theta.unwrap_or(gbm.dt);
        let mut th = ThetaAccumulator::new(self.strike, gbm.sigma, dt_theta);
        let mut tk = TickAccumulator::new(self.strike, gbm.sigma, self.tick_spacing);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut next = checkpoints.iter().copied().peekable();
        let mut t_prev = 0.0;
        for i in 1..=gbm.steps {
            // Same time grid as a simulated PricePath, so dt matches bitwise.
            let t_i = i as f64 * gbm.dt;
            let dt = t_i - t_prev;
            t_prev = t_i;
            let s = stepper.price();
            if theta {
                th.push(s, dt);
            }
            if tick {
                tk.push(s, dt);
            }
            if next.peek() == Some(&i) {
                next.next();
                out.push((th.value(), tk.value()));
                if next.peek().is_none() {
                    break;
                }
            }
            stepper.advance();
        }
        out
    }
}

/// Premium statistics of `n_paths` paths under one estimator.
pub fn mc_premium_distribution(
    params: &GbmParams,
    k: f64,
    n_paths: usize,
    estimator: Estimator,
) -> Result<PremiumStats> {
    let study = PremiumStudy::new(params.clone(), k, n_paths);
    let premiums = study.premiums_for(estimator)?;
    let bs = bs_call_price(params.s0, k, params.sigma, params.horizon())?;
    let zero = match estimator {
        Estimator::Theta => THETA_ZERO_THRESHOLD * bs,
        Estimator::Tick => 0.0,
    };
    PremiumStats::from_premiums(&premiums, bs, zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{stream_premium_theta, stream_premium_tick};

    fn small() -> GbmParams {
        GbmParams::minutely(100.0, 1.0, 0.5, 42)
    }

    #[test]
    fn stats_of_known_sample() {
        let s = PremiumStats::from_premiums(&[0.0, 1.0, 2.0, 5.0], 1.0, 0.0).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.frac_zero, 0.25);
        assert_eq!(s.frac_ge_2bs, 0.5);
        assert!(PremiumStats::from_premiums(&[], 1.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_diffusion_far_from_strike() {
        let p = GbmParams::minutely(100.0, 1e-9, 1.0, 5);
        for est in [Estimator::Theta, Estimator::Tick] {
            let s = mc_premium_distribution(&p, 150.0, 1, est).unwrap();
            assert_eq!(s.mean, 0.0);
            assert_eq!(s.frac_zero, 1.0);
            assert_eq!(s.n_paths, 1);
        }
    }

    #[test]
    fn matches_path_based_estimators_bitwise() {
        let params = small();
        let study = PremiumStudy::new(params.clone(), 100.5, 4);
        let out = study.run().unwrap();
        for i in 0..4 {
            let path = mc_path(&params, i as u64).unwrap();
            let th = stream_premium_theta(&path, 100.5, 1.0, params.dt).unwrap();
            let tk = stream_premium_tick(&path, 100.5, 1.0, DEFAULT_TICK_SPACING).unwrap();
            assert_eq!(out.theta_premiums[i].to_bits(), th.to_bits());
            assert_eq!(out.tick_premiums[i].to_bits(), tk.to_bits());
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let mut study = PremiumStudy::new(small(), 101.0, 64);
        study.checkpoints = vec![100, 360];
        let par = study.run().unwrap();
        study.parallel = false;
        let seq = study.run().unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.checkpoints.len(), 3);
    }

    #[test]
    fn single_estimator_matches_study() {
        let study = PremiumStudy::new(small(), 99.0, 16);
        let out = study.run().unwrap();
        assert_eq!(study.premiums_for(Estimator::Theta).unwrap(), out.theta_premiums);
        assert_eq!(study.premiums_for(Estimator::Tick).unwrap(), out.tick_premiums);
    }

    #[test]
    fn checkpoint_prefix_matches_shorter_run() {
        let mut study = PremiumStudy::new(small(), 100.0, 8);
        study.checkpoints = vec![200];
        let out = study.run().unwrap();
        let short = PremiumStudy::new(GbmParams { steps: 200, ..small() }, 100.0, 8).run().unwrap();
        assert_eq!(out.checkpoints[0], short.checkpoints[0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mc_premium_distribution(&small(), 100.0, 0, Estimator::Tick).is_err());
        let mut study = PremiumStudy::new(small(), 100.0, 1);
        study.checkpoints = vec![0];
        assert!(study.run().is_err());
        study.checkpoints = vec![100_000];
        assert!(study.run().is_err());
    }

    #[test]
    fn path_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| path_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
    }
}
