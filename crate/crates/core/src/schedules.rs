//! Epoch learning-rate schedules `η_t`, step-size caps and exact schedule sums.
//!
//! Inner steps of epoch `t` all use `η_t / n`. The four closed forms are
//!
//! | kind        | `η_t`                              |
//! |-------------|------------------------------------|
//! | constant    | `γ / T^{1/3}`                      |
//! | diminishing | `γ / (t + λ)^{1/3}`                |
//! | exponential | `γ ρ^{t/T} / T^{1/3}`              |
//! | cosine      | `γ (1 + cos(tπ/T)) / T^{1/3}`      |
//!
//! With reshuffling scaling enabled, `γ` is replaced by `γ n^{1/3}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    Constant,
    Diminishing { lambda: f64 },
    Exponential { rho: f64 },
    Cosine,
    /// Explicit per-epoch rates; `etas[t-1] = η_t`.
    Custom { etas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub gamma: f64,
    pub horizon: usize,
    /// Multiplier on `γ`; `n^{1/3}` under reshuffling scaling, else 1.
    pub scale: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, gamma: f64, horizon: usize) -> Result<Self> {
        let s = Schedule { kind, gamma, horizon, scale: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(gamma: f64, horizon: usize) -> Result<Self> {
        Self::new(ScheduleKind::Constant, gamma, horizon)
    }

    pub fn diminishing(gamma: f64, lambda: f64, horizon: usize) -> Result<Self> {
        Self::new(ScheduleKind::Diminishing { lambda }, gamma, horizon)
    }

    pub fn exponential(gamma: f64, rho: f64, horizon: usize) -> Result<Self> {
        Self::new(ScheduleKind::Exponential { rho }, gamma, horizon)
    }

    pub fn cosine(gamma: f64, horizon: usize) -> Result<Self> {
        Self::new(ScheduleKind::Cosine, gamma, horizon)
    }

    pub fn custom(etas: Vec<f64>) -> Result<Self> {
        let horizon = etas.len();
        Self::new(ScheduleKind::Custom { etas }, 1.0, horizon)
    }

    /// Multiplies `γ` by `n^{1/3}`.
    pub fn with_rr_scaling(mut self, n: usize) -> Self {
        self.scale = (n as f64).cbrt();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("schedule horizon T must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        match &self.kind {
            ScheduleKind::Constant => {}
            ScheduleKind::Diminishing { lambda } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
                }
            }
            ScheduleKind::Exponential { rho } => {
                if !(*rho > 0.0 && *rho <= 1.0) {
                    return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
                }
            }
            ScheduleKind::Cosine => {
                if self.horizon < 2 {
                    return Err(Error::invalid("cosine schedule needs T >= 2"));
                }
            }
            ScheduleKind::Custom { etas } => {
                if let Some(bad) = etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
                    return Err(Error::invalid(format!("custom rates must be finite and nonnegative, got {bad}")));
                }
                if !etas.iter().any(|e| *e > 0.0) {
                    return Err(Error::invalid("custom rates are all zero"));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `η_t` for `1 ≤ t ≤ T`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.horizon {
            return Err(Error::EpochOutOfRange { t, horizon: self.horizon });
        }
        Ok(self.eta_unchecked(t))
    }

    fn eta_unchecked(&self, t: usize) -> f64 {
        let big_t = self.horizon as f64;
        let g = self.gamma * self.scale;
        let tf = t as f64;
        match &self.kind {
            ScheduleKind::Constant => g / big_t.cbrt(),
            ScheduleKind::Diminishing { lambda } => g / (tf + lambda).cbrt(),
            ScheduleKind::Exponential { rho } => g * rho.powf(tf / big_t) / big_t.cbrt(),
            ScheduleKind::Cosine => {
                // clamp the rounding residue of 1 + cos(π) to exact zero
                let c = if t == self.horizon { 0.0 } else { 1.0 + (tf * PI / big_t).cos() };
                g * c / big_t.cbrt()
            }
            ScheduleKind::Custom { etas } => etas[t - 1],
        }
    }

    /// `(η_1, …, η_T)`.
    pub fn etas(&self) -> Vec<f64> {
        (1..=self.horizon).map(|t| self.eta_unchecked(t)).collect()
    }

    pub fn initial_eta(&self) -> f64 {
        self.eta_unchecked(1)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.etas().windows(2).all(|w| w[1] <= w[0])
    }

    pub fn sums(&self) -> ScheduleSums {
        ScheduleSums::from_etas(&self.etas())
    }

    /// Scales `γ` down so that `η_1 ≤ max_eta`; returns whether it changed.
    /// Only meaningful for non-increasing schedules, where `η_1` is the largest rate.
    pub fn clamp_to(&mut self, max_eta: f64) -> bool {
        let first = self.etas().into_iter().fold(0.0, f64::max);
        if first <= max_eta {
            return false;
        }
        let factor = max_eta / first;
        match &mut self.kind {
            ScheduleKind::Custom { etas } => etas.iter_mut().for_each(|e| *e *= factor),
            _ => self.gamma *= factor,
        }
        true
    }

    /// Flags a schedule that violates `0 ≤ η_t ≤ max_eta`.
    pub fn check_cap(&self, cap: &StepCap) -> Result<()> {
        let tol = cap.max_eta * 1e-12;
        match self.etas().iter().enumerate().find(|(_, e)| **e > cap.max_eta + tol) {
            Some((k, e)) => Err(Error::PremisesUnmet(format!(
                "eta_{} = {e} exceeds the step-size cap {} ({} = {})",
                k + 1,
                cap.max_eta,
                cap.kind.symbol(),
                cap.constant
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    /// `K` for arbitrary permutations.
    General,
    /// `D` for randomized reshuffling.
    Reshuffling,
    /// `η_t ≤ 1/L` for single-shuffle momentum.
    Smoothness,
}

impl CapKind {
    fn symbol(self) -> &'static str {
        match self {
            CapKind::General => "K",
            CapKind::Reshuffling => "D",
            CapKind::Smoothness => "1",
        }
    }
}

/// Upper bound on the epoch learning rate: `max_eta = 1 / (L √constant)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCap {
    pub kind: CapKind,
    pub constant: f64,
    pub max_eta: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

fn check_l_theta(theta: f64, smoothness: f64) -> Result<()> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be nonnegative, got {theta}")));
    }
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(Error::invalid(format!("L must be positive, got {smoothness}")));
    }
    Ok(())
}

/// `K = max(5/2, 9(5 − 3β)(Θ + 1)/(1 − β))`, `max_eta = 1/(L√K)`.
pub fn cap_general(beta: f64, theta: f64, smoothness: f64) -> Result<StepCap> {
    check_beta(beta)?;
    check_l_theta(theta, smoothness)?;
    let k = f64::max(2.5, 9.0 * (5.0 - 3.0 * beta) * (theta + 1.0) / (1.0 - beta));
    Ok(StepCap { kind: CapKind::General, constant: k, max_eta: 1.0 / (smoothness * k.sqrt()) })
}

/// `D = max(5/3, 6(5 − 3β)(Θ + n)/(n(1 − β)))`, `max_eta = 1/(L√D)`.
pub fn cap_rr(beta: f64, theta: f64, n: usize, smoothness: f64) -> Result<StepCap> {
    check_beta(beta)?;
    check_l_theta(theta, smoothness)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let nf = n as f64;
    let d = f64::max(5.0 / 3.0, 6.0 * (5.0 - 3.0 * beta) * (theta + nf) / (nf * (1.0 - beta)));
    Ok(StepCap { kind: CapKind::Reshuffling, constant: d, max_eta: 1.0 / (smoothness * d.sqrt()) })
}

/// `max_eta = 1/L`.
pub fn cap_smoothness(smoothness: f64) -> Result<StepCap> {
    check_l_theta(0.0, smoothness)?;
    Ok(StepCap { kind: CapKind::Smoothness, constant: 1.0, max_eta: 1.0 / smoothness })
}

/// Exact sums over `t = 1..T` used by the bound formulas, with `η_0 := η_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSums {
    /// `Σ η_t`
    pub sum_eta: f64,
    /// `Σ η_{t−1}³`
    pub sum_eta_prev_cubed: f64,
    /// `Σ ξ_t³`, `ξ_t = max(η_t, η_{t−1})`, `ξ_1 = η_1`
    pub sum_xi_cubed: f64,
}

impl ScheduleSums {
    pub fn from_etas(etas: &[f64]) -> Self {
        let mut sums = ScheduleSums { sum_eta: 0.0, sum_eta_prev_cubed: 0.0, sum_xi_cubed: 0.0 };
        let Some(&first) = etas.first() else { return sums };
        let mut prev = first;
        for (k, &eta) in etas.iter().enumerate() {
            let xi = if k == 0 { eta } else { eta.max(prev) };
            sums.sum_eta += eta;
            sums.sum_eta_prev_cubed += prev.powi(3);
            sums.sum_xi_cubed += xi.powi(3);
            prev = eta;
        }
        sums
    }
}

/// Free-function form of [`Schedule::sums`].
pub fn schedule_sums(schedule: &Schedule) -> ScheduleSums {
    schedule.sums()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate() {
        let s = Schedule::constant(1.0, 8).unwrap();
        for t in 1..=8 {
            assert!((s.eta(t).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!(matches!(s.eta(0), Err(Error::EpochOutOfRange { .. })));
        assert!(matches!(s.eta(9), Err(Error::EpochOutOfRange { .. })));
    }

    #[test]
    fn cosine_four_epochs() {
        // γ/T^{1/3} = 1
        let s = Schedule::cosine(4f64.cbrt(), 4).unwrap();
        let e = s.etas();
        let want = [1.0 + 0.5f64.sqrt(), 1.0, 1.0 - 0.5f64.sqrt(), 0.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        assert!((s.sums().sum_eta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_final_epoch() {
        let gamma = 0.7;
        let s = Schedule::exponential(gamma, 0.5, 10).unwrap();
        let direct = s.eta(10).unwrap();
        assert!((direct - gamma * 0.5 / 10f64.cbrt()).abs() < 1e-15);
        let alpha = 0.5f64.powf(0.1);
        let mut e = gamma / 10f64.cbrt();
        for _ in 0..10 {
            e *= alpha;
        }
        assert!((direct - e).abs() < 1e-14);
    }

    #[test]
    fn diminishing_rate() {
        let s = Schedule::diminishing(2.0, 7.0, 3).unwrap();
        assert!((s.eta(1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rr_scaling_multiplies_gamma() {
        let s = Schedule::constant(1.0, 8).unwrap().with_rr_scaling(27);
        assert!((s.eta(3).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn invalid_schedules() {
        assert!(Schedule::constant(0.0, 4).is_err());
        assert!(Schedule::constant(1.0, 0).is_err());
        assert!(Schedule::diminishing(1.0, -1.0, 4).is_err());
        assert!(Schedule::exponential(1.0, 1.5, 4).is_err());
        assert!(Schedule::exponential(1.0, 0.0, 4).is_err());
        assert!(Schedule::cosine(1.0, 1).is_err());
        assert!(Schedule::custom(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn caps() {
        assert_eq!(cap_general(0.0, 0.0, 1.0).unwrap().constant, 45.0);
        assert!((cap_general(0.5, 1.0, 1.0).unwrap().constant - 126.0).abs() < 1e-12);
        assert!(cap_general(0.99, 0.3, 1.0).unwrap().constant > cap_general(0.5, 0.3, 1.0).unwrap().constant);
        assert!(cap_general(1.0, 0.0, 1.0).is_err());
        assert!(cap_general(-0.1, 0.0, 1.0).is_err());
        for n in [1, 7, 1000] {
            assert!((cap_rr(0.0, 0.0, n, 1.0).unwrap().constant - 30.0).abs() < 1e-12);
        }
        assert!((cap_rr(0.5, 0.0, 1, 1.0).unwrap().constant - 42.0).abs() < 1e-12);
        let c = cap_general(0.0, 0.0, 2.0).unwrap();
        assert!((c.max_eta - 1.0 / (2.0 * 45f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn rr_cap_large_n_limit() {
        let beta = 0.3;
        let limit = 6.0 * (5.0 - 3.0 * beta) / (1.0 - beta);
        let d = cap_rr(beta, 2.0, 1_000_000, 1.0).unwrap().constant;
        assert!((d - limit).abs() < 1e-3);
    }

    #[test]
    fn constant_sums_closed_form() {
        for (gamma, t) in [(0.3, 1usize), (1.0, 8), (2.5, 1000)] {
            let s = Schedule::constant(gamma, t).unwrap().sums();
            let tf = t as f64;
            assert!((s.sum_eta - gamma * tf.powf(2.0 / 3.0)).abs() <= 1e-10 * s.sum_eta);
            assert!((s.sum_eta_prev_cubed - gamma.powi(3)).abs() <= 1e-10 * gamma.powi(3));
            assert!((s.sum_xi_cubed - gamma.powi(3)).abs() <= 1e-10 * gamma.powi(3));
        }
    }

    #[test]
    fn single_epoch_diminishing_sums() {
        let s = Schedule::diminishing(1.7, 0.0, 1).unwrap().sums();
        assert!((s.sum_eta - 1.7).abs() < 1e-15);
        assert!((s.sum_eta_prev_cubed - 1.7f64.powi(3)).abs() < 1e-12);
        assert!((s.sum_xi_cubed - 1.7f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn cosine_sum_identity() {
        for t in 2..=1000usize {
            let a: f64 = (1..=t).map(|k| (k as f64 * PI / t as f64).cos()).sum();
            assert!((a + 1.0).abs() <= 1e-9, "T={t}: {a}");
        }
    }

    #[test]
    fn xi_uses_max_for_increasing_custom() {
        let s = ScheduleSums::from_etas(&[1.0, 2.0]);
        assert_eq!(s.sum_xi_cubed, 1.0 + 8.0);
        assert_eq!(s.sum_eta_prev_cubed, 1.0 + 1.0);
    }

    #[test]
    fn cap_validator_and_clamp() {
        let cap = cap_general(0.5, 0.0, 1.0).unwrap();
        let mut s = Schedule::constant(1.0, 8).unwrap();
        assert!(matches!(s.check_cap(&cap), Err(Error::PremisesUnmet(_))));
        assert!(s.clamp_to(cap.max_eta));
        assert!(s.check_cap(&cap).is_ok());
        assert!((s.initial_eta() - cap.max_eta).abs() < 1e-15);
        assert!(!s.clamp_to(cap.max_eta));
    }

    #[test]
    fn non_monotone_custom_detected() {
        assert!(!Schedule::custom(vec![0.1, 0.2]).unwrap().is_non_increasing());
        assert!(Schedule::cosine(1.0, 16).unwrap().is_non_increasing());
    }
}
