//! Epoch-structured shuffling optimizers and the shared run loop.
//!
//! Every method runs `T` epochs of `n` inner steps. Epoch `t` draws a
//! permutation from the run's [`PermutationStream`], uses per-step size
//! `η_t / n`, and records `F(w̃_{t−1})` and `‖∇F(w̃_{t−1})‖²` at its start.
//! The output iterate `ŵ_T` is drawn with probability `η_t / Σ η_t`; its
//! index depends only on the schedule and seed, so it is sampled up front and
//! captured during the run even when snapshots are not kept.

mod rules;

pub use rules::{AdamRule, InnerRule, SgdRule, SgdmRule, SmgRule, SsmgRule};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;
use crate::schedules::Schedule;
use crate::shuffling::{output_rng, select_output_index, PermutationStream, ShufflingKind, ShufflingStrategy};

/// Snapshots of every epoch-start iterate are kept while `T·d` stays below this.
pub const SNAPSHOT_BUDGET: usize = 1_000_000;

pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case", deny_unknown_fields)]
pub enum Algorithm {
    Smg { beta: f64 },
    Ssmg { beta: f64 },
    Sgd,
    Sgdm { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Algorithm {
    pub fn sgdm_default() -> Self {
        Algorithm::Sgdm { momentum: 0.9 }
    }

    pub fn adam_default() -> Self {
        Algorithm::Adam { beta1: 0.9, beta2: 0.999, eps: ADAM_EPSILON }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Smg { .. } => "smg",
            Algorithm::Ssmg { .. } => "ssmg",
            Algorithm::Sgd => "sgd",
            Algorithm::Sgdm { .. } => "sgdm",
            Algorithm::Adam { .. } => "adam",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        match *self {
            Algorithm::Smg { beta } | Algorithm::Ssmg { beta } => unit("beta", beta),
            Algorithm::Sgd => Ok(()),
            Algorithm::Sgdm { momentum } => unit("momentum", momentum),
            Algorithm::Adam { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                if eps > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("adam epsilon must be positive"))
                }
            }
        }
    }

    /// Runs this algorithm; see [`run_with_observer`].
    pub fn run<P: Problem + ?Sized>(
        &self,
        problem: &P,
        schedule: &Schedule,
        strategy: ShufflingStrategy,
        w0: &[f64],
    ) -> Result<RunRecord> {
        self.run_observed(problem, schedule, strategy, w0, &mut ())
    }

    pub fn run_observed<P: Problem + ?Sized, O: RunObserver>(
        &self,
        problem: &P,
        schedule: &Schedule,
        strategy: ShufflingStrategy,
        w0: &[f64],
        observer: &mut O,
    ) -> Result<RunRecord> {
        self.validate()?;
        let (n, d) = (problem.n(), problem.dim());
        match *self {
            Algorithm::Smg { beta } => {
                run_with_observer(problem, &mut SmgRule::new(beta, n, d), schedule, strategy, w0, observer)
            }
            Algorithm::Ssmg { beta } => {
                if strategy.kind == ShufflingKind::RandomReshuffling {
                    return Err(Error::invalid(
                        "single-shuffle momentum needs one fixed permutation (incremental or shuffle-once)",
                    ));
                }
                run_with_observer(problem, &mut SsmgRule::new(beta, d), schedule, strategy, w0, observer)
            }
            Algorithm::Sgd => run_with_observer(problem, &mut SgdRule, schedule, strategy, w0, observer),
            Algorithm::Sgdm { momentum } => {
                run_with_observer(problem, &mut SgdmRule::new(momentum, d), schedule, strategy, w0, observer)
            }
            Algorithm::Adam { beta1, beta2, eps } => {
                run_with_observer(problem, &mut AdamRule::new(beta1, beta2, eps, d), schedule, strategy, w0, observer)
            }
        }
    }
}

/// SMG run: anchor `m₀` fixed per epoch, refreshed from the epoch gradient average.
pub fn smg_run<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    beta: f64,
    w0: &[f64],
) -> Result<RunRecord> {
    Algorithm::Smg { beta }.run(problem, schedule, strategy, w0)
}

/// Single-shuffle momentum run; `strategy` must be incremental or shuffle-once.
pub fn ssmg_run<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    beta: f64,
    w0: &[f64],
) -> Result<RunRecord> {
    Algorithm::Ssmg { beta }.run(problem, schedule, strategy, w0)
}

pub fn shuffling_sgd_run<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    w0: &[f64],
) -> Result<RunRecord> {
    Algorithm::Sgd.run(problem, schedule, strategy, w0)
}

pub fn sgdm_run<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    momentum: f64,
    w0: &[f64],
) -> Result<RunRecord> {
    Algorithm::Sgdm { momentum }.run(problem, schedule, strategy, w0)
}

pub fn adam_run<P: Problem + ?Sized>(
    problem: &P,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    beta1: f64,
    beta2: f64,
    w0: &[f64],
) -> Result<RunRecord> {
    Algorithm::Adam { beta1, beta2, eps: ADAM_EPSILON }.run(problem, schedule, strategy, w0)
}

/// Seeded `N(0, scale²)` starting point.
pub fn initial_point(dim: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect()
}

/// One inner step as seen by a [`RunObserver`], after the update was applied.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub epoch: usize,
    /// Inner index `i ∈ 0..n`.
    pub step: usize,
    /// Component `π(i+1)`, 0-based.
    pub component: usize,
    pub step_size: f64,
    pub grad: &'a [f64],
    /// Iterate after the update, `w_{i+1}`.
    pub w: &'a [f64],
    pub momentum: Option<&'a [f64]>,
    pub anchor: Option<&'a [f64]>,
}

/// Hooks into a run; the unit type ignores everything.
pub trait RunObserver {
    fn epoch_start(&mut self, _epoch: usize, _eta: f64, _w: &[f64]) {}
    fn step(&mut self, _event: &StepEvent<'_>) {}
    fn finish(&mut self, _w: &[f64]) {}
}

impl RunObserver for () {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub eta: f64,
    /// `F(w̃_{t−1})`
    pub loss: f64,
    /// `‖∇F(w̃_{t−1})‖²`
    pub grad_norm_sq: f64,
}

/// Completed run: per-epoch trace, output iterate and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub strategy: ShufflingKind,
    pub seed: u64,
    pub rows: Vec<EpochRow>,
    /// `w̃₀ … w̃_{T−1}` when `T·d ≤ SNAPSHOT_BUDGET`.
    pub snapshots: Option<Vec<Vec<f64>>>,
    /// `t − 1` of the sampled output `ŵ_T = w̃_{t−1}`.
    pub selected_index: usize,
    pub selected_iterate: Vec<f64>,
    /// `w̃_T`
    pub final_iterate: Vec<f64>,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub config_hash: Option<String>,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eta).collect()
    }

    pub fn sum_eta(&self) -> f64 {
        self.rows.iter().map(|r| r.eta).sum()
    }

    /// `Σ η_t ‖∇F(w̃_{t−1})‖² / Σ η_t`, the left-hand side of every bound.
    pub fn weighted_grad_norm_sq(&self) -> f64 {
        let num: f64 = self.rows.iter().map(|r| r.eta * r.grad_norm_sq).sum();
        num / self.sum_eta()
    }

    pub fn initial_loss(&self) -> f64 {
        self.rows[0].loss
    }

    pub fn initial_grad_norm_sq(&self) -> f64 {
        self.rows[0].grad_norm_sq
    }
}

/// Runs `rule` for `schedule.horizon()` epochs.
pub fn run_with_observer<P, R, O>(
    problem: &P,
    rule: &mut R,
    schedule: &Schedule,
    strategy: ShufflingStrategy,
    w0: &[f64],
    observer: &mut O,
) -> Result<RunRecord>
where
    P: Problem + ?Sized,
    R: InnerRule + ?Sized,
    O: RunObserver + ?Sized,
{
    let (n, d) = (problem.n(), problem.dim());
    if w0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w0.len() });
    }
    if !linalg::all_finite(w0) {
        return Err(Error::invalid("initial point has non-finite entries"));
    }
    let horizon = schedule.horizon();
    let etas = schedule.etas();
    let selected_index = select_output_index(&etas, &mut output_rng(strategy.seed))?;
    let keep_snapshots = horizon.saturating_mul(d) <= SNAPSHOT_BUDGET;

    let mut stream = PermutationStream::new(strategy, n)?;
    let mut w = w0.to_vec();
    let mut grad = vec![0.0; d];
    let mut rows = Vec::with_capacity(horizon);
    let mut snapshots = keep_snapshots.then(|| Vec::with_capacity(horizon));
    let mut selected_iterate = Vec::new();
    let inv_n = 1.0 / n as f64;

    for (t, &eta) in (1..=horizon).zip(&etas) {
        let loss = problem.value(&w);
        let grad_norm_sq = linalg::norm_sq(&problem.full_grad(&w));
        if !(loss.is_finite() && grad_norm_sq.is_finite()) {
            return Err(Error::NonFinite { epoch: t, step: 0 });
        }
        rows.push(EpochRow { epoch: t, eta, loss, grad_norm_sq });
        if t - 1 == selected_index {
            selected_iterate = w.clone();
        }
        if let Some(s) = snapshots.as_mut() {
            s.push(w.clone());
        }

        observer.epoch_start(t, eta, &w);
        rule.begin_epoch(t);
        let step_size = eta * inv_n;
        for (i, &component) in stream.next_epoch_permutation(t).iter().enumerate() {
            problem.component_grad_into(&w, component, &mut grad);
            rule.step(&mut w, &grad, step_size);
            if !linalg::all_finite(&w) {
                return Err(Error::NonFinite { epoch: t, step: i });
            }
            observer.step(&StepEvent {
                epoch: t,
                step: i,
                component,
                step_size,
                grad: &grad,
                w: &w,
                momentum: rule.momentum(),
                anchor: rule.anchor(),
            });
        }
        rule.end_epoch();
    }
    observer.finish(&w);

    let final_loss = problem.value(&w);
    let final_grad_norm_sq = linalg::norm_sq(&problem.full_grad(&w));
    if !(final_loss.is_finite() && final_grad_norm_sq.is_finite()) {
        return Err(Error::NonFinite { epoch: horizon, step: n });
    }
    Ok(RunRecord {
        algorithm: rule.name().to_string(),
        strategy: strategy.kind,
        seed: strategy.seed,
        rows,
        snapshots,
        selected_index,
        selected_iterate,
        final_iterate: w,
        final_loss,
        final_grad_norm_sq,
        config_hash: None,
    })
}
