use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::RunRecord;
use crate::problems::ProblemConstants;
use crate::schedules::{cap_general, cap_rr, cap_smoothness, ScheduleSums, StepCap};
use crate::shuffling::ShufflingKind;

/// Relative tolerance for deterministic `lhs ≤ rhs` comparisons.
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-9;

/// Monte Carlo allowance, in standard errors, for the expectation bound.
pub const MONTE_CARLO_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// SMG, any permutations.
    T1,
    /// SMG, randomized reshuffling (expectation bound).
    T2,
    /// Single-shuffle momentum under bounded gradients.
    T3,
}

/// Every quantity entering a bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    #[serde(rename = "L")]
    pub smoothness: f64,
    pub theta: f64,
    pub sigma_sq: f64,
    #[serde(rename = "G")]
    pub grad_bound: Option<f64>,
    pub beta: f64,
    pub n: usize,
    /// `F(w̃₀)`
    pub f_initial: f64,
    pub f_lower: f64,
    /// `‖∇F(w̃₀)‖²`
    pub grad_norm_sq_initial: f64,
    pub eta_1: f64,
    pub sums: ScheduleSums,
    pub cap: StepCap,
    /// Number of runs averaged into `lhs`.
    pub samples: usize,
    /// `3·SE` added to the right-hand side for seed-averaged audits, else 0.
    pub monte_carlo_allowance: f64,
}

/// Realized left-hand side against a theorem's right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub lhs: f64,
    pub rhs: f64,
    pub constants_used: ConstantsUsed,
    pub satisfied: bool,
    pub slack: f64,
}

impl BoundReport {
    fn new(theorem: Theorem, lhs: f64, rhs: f64, constants_used: ConstantsUsed) -> Self {
        let satisfied = if constants_used.samples > 1 {
            lhs <= rhs + constants_used.monte_carlo_allowance
        } else {
            lhs <= rhs * (1.0 + DETERMINISTIC_TOLERANCE)
        };
        BoundReport { theorem, lhs, rhs, constants_used, satisfied, slack: rhs - lhs }
    }

    pub fn summary(&self) -> String {
        format!(
            "{:?}: lhs={:.6e} rhs={:.6e} slack={:.6e} [{}]",
            self.theorem,
            self.lhs,
            self.rhs,
            self.slack,
            if self.satisfied { "satisfied" } else { "VIOLATED" }
        )
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::PremisesUnmet(format!("beta = {beta} outside [0, 1)")));
    }
    Ok(())
}

fn check_schedule(etas: &[f64], cap: &StepCap) -> Result<()> {
    if etas.is_empty() {
        return Err(Error::PremisesUnmet("empty run".into()));
    }
    if !(etas[0] > 0.0) {
        return Err(Error::PremisesUnmet("eta_1 must be positive".into()));
    }
    if let Some(k) = etas.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::PremisesUnmet(format!("schedule increases at epoch {}", k + 2)));
    }
    let tol = cap.max_eta * 1e-12;
    if etas[0] > cap.max_eta + tol {
        return Err(Error::PremisesUnmet(format!(
            "eta_1 = {} exceeds the step-size cap {}",
            etas[0], cap.max_eta
        )));
    }
    Ok(())
}

fn constants_used(
    record: &RunRecord,
    c: &ProblemConstants,
    beta: f64,
    n: usize,
    cap: StepCap,
) -> ConstantsUsed {
    ConstantsUsed {
        smoothness: c.smoothness,
        theta: c.theta,
        sigma_sq: c.sigma_sq,
        grad_bound: c.grad_bound,
        beta,
        n,
        f_initial: record.initial_loss(),
        f_lower: c.f_lower,
        grad_norm_sq_initial: record.initial_grad_norm_sq(),
        eta_1: record.rows[0].eta,
        sums: ScheduleSums::from_etas(&record.etas()),
        cap,
        samples: 1,
        monte_carlo_allowance: 0.0,
    }
}

/// `4[F(w̃₀) − F_*]/((1−β)Ση) + 9σ²L²(5−3β)/(1−β) · Ση_{t−1}³/Ση`
pub fn theorem1_formula(f_initial: f64, c: &ProblemConstants, beta: f64, sums: &ScheduleSums) -> f64 {
    let gap = f_initial - c.f_lower;
    4.0 * gap / ((1.0 - beta) * sums.sum_eta)
        + 9.0 * c.sigma_sq * c.smoothness.powi(2) * (5.0 - 3.0 * beta) / (1.0 - beta) * sums.sum_eta_prev_cubed
            / sums.sum_eta
}

/// `4[F(w̃₀) − F_*]/((1−β)Ση) + 6σ²(5−3β)L²/(n(1−β)) · Ση_{t−1}³/Ση`
pub fn theorem2_formula(f_initial: f64, c: &ProblemConstants, beta: f64, n: usize, sums: &ScheduleSums) -> f64 {
    let gap = f_initial - c.f_lower;
    4.0 * gap / ((1.0 - beta) * sums.sum_eta)
        + 6.0 * c.sigma_sq * (5.0 - 3.0 * beta) * c.smoothness.powi(2) / (n as f64 * (1.0 - beta))
            * sums.sum_eta_prev_cubed
            / sums.sum_eta
}

/// `Δ₁/((Ση)(1−βⁿ)) + L²G² Σξ³/Ση + 4βⁿG²/(1−βⁿ)` with
/// `Δ₁ = 2[F(w̃₀) − F_*] + (1/L + η₁)‖∇F(w̃₀)‖² + 2Lη₁²G²`.
#[allow(clippy::too_many_arguments)]
pub fn theorem3_formula(
    f_initial: f64,
    grad_norm_sq_initial: f64,
    c: &ProblemConstants,
    grad_bound: f64,
    beta: f64,
    n: usize,
    eta_1: f64,
    sums: &ScheduleSums,
) -> f64 {
    let l = c.smoothness;
    let g2 = grad_bound * grad_bound;
    let beta_n = beta.powi(n as i32);
    let delta1 = 2.0 * (f_initial - c.f_lower) + (1.0 / l + eta_1) * grad_norm_sq_initial + 2.0 * l * eta_1 * eta_1 * g2;
    delta1 / (sums.sum_eta * (1.0 - beta_n)) + l * l * g2 * sums.sum_xi_cubed / sums.sum_eta
        + 4.0 * beta_n * g2 / (1.0 - beta_n)
}

/// Right-hand side of the any-permutation SMG bound, after checking its premises
/// (monotone schedule, `η_t ≤ 1/(L√K)`).
pub fn theorem1_rhs(record: &RunRecord, c: &ProblemConstants, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let cap = cap_general(beta, c.theta, c.smoothness)?;
    check_schedule(&record.etas(), &cap)?;
    let sums = ScheduleSums::from_etas(&record.etas());
    Ok(theorem1_formula(record.initial_loss(), c, beta, &sums))
}

/// Right-hand side of the reshuffling bound (`η_t ≤ 1/(L√D)`, `η₀ := η₁`).
pub fn theorem2_rhs(record: &RunRecord, c: &ProblemConstants, beta: f64, n: usize) -> Result<f64> {
    check_beta(beta)?;
    if record.strategy != ShufflingKind::RandomReshuffling {
        return Err(Error::PremisesUnmet("reshuffling bound needs randomized reshuffling".into()));
    }
    let cap = cap_rr(beta, c.theta, n, c.smoothness)?;
    check_schedule(&record.etas(), &cap)?;
    let sums = ScheduleSums::from_etas(&record.etas());
    Ok(theorem2_formula(record.initial_loss(), c, beta, n, &sums))
}

/// Right-hand side of the single-shuffle momentum bound (`η_t ≤ 1/L`, finite `G`).
pub fn theorem3_rhs(record: &RunRecord, c: &ProblemConstants, beta: f64, n: usize) -> Result<f64> {
    check_beta(beta)?;
    let g = c
        .grad_bound
        .ok_or_else(|| Error::PremisesUnmet("component gradients are not uniformly bounded".into()))?;
    if record.strategy == ShufflingKind::RandomReshuffling {
        return Err(Error::PremisesUnmet("single-shuffle bound needs one fixed permutation".into()));
    }
    let cap = cap_smoothness(c.smoothness)?;
    let etas = record.etas();
    if let Some(k) = etas.iter().position(|e| *e > cap.max_eta * (1.0 + 1e-12)) {
        return Err(Error::PremisesUnmet(format!("eta_{} exceeds 1/L = {}", k + 1, cap.max_eta)));
    }
    if !(etas[0] > 0.0) {
        return Err(Error::PremisesUnmet("eta_1 must be positive".into()));
    }
    let sums = ScheduleSums::from_etas(&etas);
    Ok(theorem3_formula(
        record.initial_loss(),
        record.initial_grad_norm_sq(),
        c,
        g,
        beta,
        n,
        etas[0],
        &sums,
    ))
}

/// Deterministic audit of an SMG run against the any-permutation bound.
pub fn audit_theorem1(record: &RunRecord, c: &ProblemConstants, beta: f64, n: usize) -> Result<BoundReport> {
    let rhs = theorem1_rhs(record, c, beta)?;
    let cap = cap_general(beta, c.theta, c.smoothness)?;
    Ok(BoundReport::new(Theorem::T1, record.weighted_grad_norm_sq(), rhs, constants_used(record, c, beta, n, cap)))
}

/// Seed-averaged audit of reshuffled SMG runs against the expectation bound:
/// satisfied when `mean(lhs) ≤ rhs + 3·SE`.
pub fn audit_theorem2(records: &[RunRecord], c: &ProblemConstants, beta: f64, n: usize) -> Result<BoundReport> {
    let first = records.first().ok_or_else(|| Error::invalid("no runs to audit"))?;
    let rhs = theorem2_rhs(first, c, beta, n)?;
    let etas = first.etas();
    for r in &records[1..] {
        if r.etas() != etas || r.initial_loss() != first.initial_loss() {
            return Err(Error::PremisesUnmet("runs differ in schedule or starting point".into()));
        }
        if r.strategy != ShufflingKind::RandomReshuffling {
            return Err(Error::PremisesUnmet("reshuffling bound needs randomized reshuffling".into()));
        }
    }
    let lhs: Vec<f64> = records.iter().map(RunRecord::weighted_grad_norm_sq).collect();
    let k = lhs.len() as f64;
    let mean = lhs.iter().sum::<f64>() / k;
    let se = if lhs.len() > 1 {
        let var = lhs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    let cap = cap_rr(beta, c.theta, n, c.smoothness)?;
    let mut used = constants_used(first, c, beta, n, cap);
    used.samples = lhs.len();
    used.monte_carlo_allowance = MONTE_CARLO_SIGMAS * se;
    Ok(BoundReport::new(Theorem::T2, mean, rhs, used))
}

/// Deterministic audit of a single-shuffle momentum run.
pub fn audit_theorem3(record: &RunRecord, c: &ProblemConstants, beta: f64, n: usize) -> Result<BoundReport> {
    let rhs = theorem3_rhs(record, c, beta, n)?;
    let cap = cap_smoothness(c.smoothness)?;
    Ok(BoundReport::new(Theorem::T3, record.weighted_grad_norm_sq(), rhs, constants_used(record, c, beta, n, cap)))
}

/// `β = (ν / T^{2/3})^{1/n}`, the momentum weight that keeps `βⁿ = ν/T^{2/3}`.
pub fn ssmg_beta(nu: f64, horizon: usize, n: usize) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::invalid("nu must be nonnegative"));
    }
    let beta = (nu / (horizon as f64).powf(2.0 / 3.0)).powf(1.0 / n as f64);
    if beta >= 1.0 {
        return Err(Error::invalid(format!("nu = {nu} gives beta = {beta} >= 1")));
    }
    Ok(beta)
}
