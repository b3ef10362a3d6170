use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::Algorithm;
use crate::problems::Problem;
use crate::schedules::Schedule;
use crate::shuffling::{ShufflingKind, ShufflingStrategy};

/// Fewer horizons than this give a fit flagged as low confidence.
pub const MIN_CONFIDENT_POINTS: usize = 4;

/// Least-squares fit of `log metric = intercept + slope · log T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub horizons: Vec<usize>,
    pub metrics: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub low_confidence: bool,
}

pub fn fit_power_law(horizons: &[usize], metrics: &[f64]) -> Result<RateFit> {
    if horizons.len() != metrics.len() {
        return Err(Error::DimensionMismatch { expected: horizons.len(), got: metrics.len() });
    }
    if horizons.len() < 2 {
        return Err(Error::invalid("need at least two horizons to fit a slope"));
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] == 0 {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    if let Some(m) = metrics.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::invalid(format!("metrics must be positive and finite, got {m}")));
    }
    let xs: Vec<f64> = horizons.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = metrics.iter().map(|m| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        horizons: horizons.to_vec(),
        metrics: metrics.to_vec(),
        slope,
        intercept: my - slope * mx,
        low_confidence: horizons.len() < MIN_CONFIDENT_POINTS,
    })
}

/// Setup for an empirical rate sweep: constant rate `γ/T^{1/3}` at each horizon.
#[derive(Debug, Clone)]
pub struct RateConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub strategy: ShufflingKind,
    pub seeds: Vec<u64>,
    pub w0: Vec<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Runs every (horizon, seed) pair, takes the per-horizon median of the weighted
/// gradient-norm average and fits its log-log slope. Any failed run aborts the fit.
pub fn fit_rate<P: Problem + ?Sized>(problem: &P, config: &RateConfig, horizons: &[usize]) -> Result<RateFit> {
    if horizons.len() < MIN_CONFIDENT_POINTS {
        return Err(Error::invalid(format!("rate fits need at least {MIN_CONFIDENT_POINTS} horizons")));
    }
    let metrics = horizon_metrics(problem, config, horizons)?;
    fit_power_law(horizons, &metrics)
}

/// Per-horizon median metric, shared by [`fit_rate`] and the CLI.
pub fn horizon_metrics<P: Problem + ?Sized>(problem: &P, config: &RateConfig, horizons: &[usize]) -> Result<Vec<f64>> {
    if config.seeds.is_empty() {
        return Err(Error::invalid("rate sweep needs at least one seed"));
    }
    let jobs: Vec<(usize, u64)> =
        horizons.iter().flat_map(|&t| config.seeds.iter().map(move |&s| (t, s))).collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let schedule = Schedule::constant(config.gamma, t)?;
            let strategy = ShufflingStrategy::new(config.strategy, seed);
            let rec = config.algorithm.run(problem, &schedule, strategy, &config.w0)?;
            Ok(rec.weighted_grad_norm_sq())
        })
        .collect::<Result<_>>()?;
    Ok(values.chunks(config.seeds.len()).map(|c| median(c.to_vec())).collect())
}
