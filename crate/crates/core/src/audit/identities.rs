use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::{Algorithm, RunObserver, StepEvent};
use crate::problems::Problem;
use crate::schedules::{cap_general, Schedule};
use crate::shuffling::{ShufflingKind, ShufflingStrategy};

/// Relative tolerance each identity must meet.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Largest `n · T` the suite accepts; every gradient of the run is kept.
pub const MAX_RECORDED_STEPS: usize = 100_000;

/// Largest horizon for the cosine-sum check.
pub const COSINE_SUM_MAX_HORIZON: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }

    fn push(&mut self, name: &str, max_deviation: f64) {
        self.checks.push(IdentityCheck {
            name: name.to_string(),
            max_deviation,
            tolerance: IDENTITY_TOLERANCE,
            // NaN deviations fail
            passed: max_deviation <= IDENTITY_TOLERANCE,
        });
    }
}

/// `‖a − b‖∞ / (1 + ‖b‖∞)`
fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    linalg::max_abs_diff(a, b) / (1.0 + scale)
}

#[derive(Default)]
struct EpochTrace {
    eta: f64,
    start: Vec<f64>,
    grads: Vec<Vec<f64>>,
    momenta: Vec<Vec<f64>>,
    anchors: Vec<Vec<f64>>,
}

/// Keeps every gradient, momentum and anchor the optimizer reports.
#[derive(Default)]
struct Recorder {
    epochs: Vec<EpochTrace>,
    last: Vec<f64>,
}

impl RunObserver for Recorder {
    fn epoch_start(&mut self, _epoch: usize, eta: f64, w: &[f64]) {
        self.epochs.push(EpochTrace { eta, start: w.to_vec(), ..Default::default() });
    }

    fn step(&mut self, e: &StepEvent<'_>) {
        let cur = self.epochs.last_mut().expect("step before epoch start");
        cur.grads.push(e.grad.to_vec());
        if let Some(m) = e.momentum {
            cur.momenta.push(m.to_vec());
        }
        if let Some(a) = e.anchor {
            cur.anchors.push(a.to_vec());
        }
    }

    fn finish(&mut self, w: &[f64]) {
        self.last = w.to_vec();
    }
}

impl Recorder {
    /// Epoch-start iterate of epoch `t + 1` (0-based `t`), or the final iterate.
    fn end_of(&self, t: usize) -> &[f64] {
        self.epochs.get(t + 1).map_or(&self.last, |e| &e.start)
    }
}

fn mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        linalg::axpy(1.0 / vs.len() as f64, v, &mut out);
    }
    out
}

/// Max over `T ∈ [2, max_horizon]` of `|Σ_{t=1}^{T} cos(tπ/T) + 1|`.
pub fn cosine_sum_deviation(max_horizon: usize) -> f64 {
    (2..=max_horizon)
        .map(|big_t| {
            let s: f64 = (1..=big_t).map(|t| (t as f64 * PI / big_t as f64).cos()).sum();
            (s + 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs SMG and single-shuffle momentum on `problem` and checks, from the recorded
/// gradients alone:
/// - the SMG anchor equals the previous epoch's mean gradient and is constant within an epoch,
/// - the SMG epoch displacement closed form,
/// - the single-shuffle momentum expansion across two consecutive epochs,
/// - `‖m‖ ≤ G` (the certified bound, else the largest observed gradient norm),
/// - the cosine sum identity.
///
/// A reshuffling `strategy` is used as is for SMG and replaced by shuffle-once for
/// the single-shuffle method.
pub fn identity_suite<P: Problem + ?Sized>(
    problem: &P,
    beta: f64,
    horizon: usize,
    strategy: ShufflingStrategy,
    w0: &[f64],
) -> Result<IdentityReport> {
    let n = problem.n();
    if horizon < 2 {
        return Err(Error::invalid("identity suite needs at least two epochs"));
    }
    if n.saturating_mul(horizon) > MAX_RECORDED_STEPS {
        return Err(Error::invalid(format!("n·T exceeds {MAX_RECORDED_STEPS}")));
    }
    let c = problem.constants();
    let cap = cap_general(beta, c.theta, c.smoothness)?;
    // varying rates exercise the η_t factor of the displacement
    let schedule = Schedule::diminishing(cap.max_eta, 1.0, horizon)?;

    let mut smg = Recorder::default();
    Algorithm::Smg { beta }.run_observed(problem, &schedule, strategy, w0, &mut smg)?;

    let single = match strategy.kind {
        ShufflingKind::RandomReshuffling => ShufflingStrategy::shuffle_once(strategy.seed),
        _ => strategy,
    };
    let mut ssmg = Recorder::default();
    Algorithm::Ssmg { beta }.run_observed(problem, &schedule, single, w0, &mut ssmg)?;

    let mut report = IdentityReport { checks: Vec::new() };

    let mut dev = 0.0_f64;
    for t in 0..horizon {
        let e = &smg.epochs[t];
        let expected = if t == 0 { vec![0.0; w0.len()] } else { mean(&smg.epochs[t - 1].grads) };
        for a in &e.anchors {
            dev = dev.max(rel_dev(a, &expected));
        }
    }
    report.push("smg anchor equals previous epoch mean gradient", dev);

    let mut dev = 0.0_f64;
    for t in 1..horizon {
        let (prev, cur) = (&smg.epochs[t - 1], &smg.epochs[t]);
        let mut expected = vec![0.0; w0.len()];
        for (gp, gc) in prev.grads.iter().zip(&cur.grads) {
            linalg::axpy(beta, gp, &mut expected);
            linalg::axpy(1.0 - beta, gc, &mut expected);
        }
        linalg::scale(-cur.eta / n as f64, &mut expected);
        let realized: Vec<f64> = smg.end_of(t).iter().zip(&cur.start).map(|(a, b)| a - b).collect();
        dev = dev.max(rel_dev(&realized, &expected));
    }
    report.push("smg epoch displacement", dev);

    let mut dev = 0.0_f64;
    let beta_n = beta.powi(n as i32);
    for t in 1..horizon {
        let (prev, cur) = (&ssmg.epochs[t - 1], &ssmg.epochs[t]);
        for i in 0..n {
            let mut expected = prev.momenta[i].clone();
            linalg::scale(beta_n, &mut expected);
            for j in i + 1..n {
                linalg::axpy((1.0 - beta) * beta.powi((n + i - j) as i32), &prev.grads[j], &mut expected);
            }
            for j in 0..=i {
                linalg::axpy((1.0 - beta) * beta.powi((i - j) as i32), &cur.grads[j], &mut expected);
            }
            dev = dev.max(rel_dev(&cur.momenta[i], &expected));
        }
    }
    report.push("single-shuffle momentum expansion", dev);

    let grad_bound = c.grad_bound.unwrap_or_else(|| {
        ssmg.epochs.iter().flat_map(|e| &e.grads).map(|g| linalg::norm(g)).fold(0.0, f64::max)
    });
    let worst = ssmg.epochs.iter().flat_map(|e| &e.momenta).map(|m| linalg::norm(m)).fold(0.0, f64::max);
    report.push("momentum norm bounded by gradient bound", (worst - grad_bound).max(0.0) / (1.0 + grad_bound));

    report.push("cosine sum equals -1", cosine_sum_deviation(COSINE_SUM_MAX_HORIZON));
    Ok(report)
}
