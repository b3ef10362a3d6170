//! Finite-sum problems `F(w) = (1/n) Σ f(w; i)` and their certified constants.
//!
//! A [`Problem`] exposes per-component values and gradients; full objective and
//! full gradient default to arithmetic means over components. Every problem
//! carries [`ProblemConstants`] certifying smoothness, the generalized
//! variance bound and a lower bound on `F`, which the bound audits rely on.

mod logistic;
mod quadratic;

pub use logistic::{
    logistic_component_grad, logistic_component_value, logistic_constants, regularizer_grad,
    LogisticProblem, REGULARIZER_GRAD_PEAK,
};
pub use quadratic::QuadraticMeanProblem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Certified constants of a finite-sum problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Smoothness constant shared by every component.
    pub smoothness: f64,
    /// Uniform bound on component gradient norms; `None` when unbounded.
    pub grad_bound: Option<f64>,
    /// Multiplicative term `Θ` of the generalized variance bound.
    pub theta: f64,
    /// Additive term `σ²` of the generalized variance bound.
    pub sigma_sq: f64,
    /// A value no larger than `inf F`.
    pub f_lower: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(Error::invalid(format!("smoothness must be positive, got {}", self.smoothness)));
        }
        if !(self.theta >= 0.0) || !(self.sigma_sq >= 0.0) {
            return Err(Error::invalid("theta and sigma_sq must be nonnegative"));
        }
        if let Some(g) = self.grad_bound {
            if !(g > 0.0) {
                return Err(Error::invalid("gradient bound must be positive"));
            }
        }
        Ok(())
    }
}

/// A finite-sum objective. Components are indexed `0..n`.
///
/// Implementations are immutable; oracles are pure and may be called from
/// several threads at once.
pub trait Problem: Send + Sync {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn constants(&self) -> &ProblemConstants;

    fn component_value(&self, w: &[f64], i: usize) -> f64;

    /// Writes `∇f(w; i)` into `out` (length `dim`).
    fn component_grad_into(&self, w: &[f64], i: usize, out: &mut [f64]);

    fn component_grad(&self, w: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.component_grad_into(w, i, &mut out);
        out
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.component_value(w, i)).sum::<f64>() / n as f64
    }

    fn full_grad(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut acc = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            self.component_grad_into(w, i, &mut g);
            linalg::axpy(1.0, &g, &mut acc);
        }
        linalg::scale(1.0 / n as f64, &mut acc);
        acc
    }
}

/// `(1/n) Σ ‖∇f(w;i) − ∇F(w)‖²` evaluated directly.
pub fn gradient_variance<P: Problem + ?Sized>(problem: &P, w: &[f64]) -> f64 {
    let full = problem.full_grad(w);
    let mut g = vec![0.0; problem.dim()];
    let mut acc = 0.0;
    for i in 0..problem.n() {
        problem.component_grad_into(w, i, &mut g);
        acc += linalg::dist_sq(&g, &full);
    }
    acc / problem.n() as f64
}

/// Outcome of checking the certified constants at one point.
#[derive(Debug, Clone, Copy)]
pub struct ConstantsCheck {
    pub variance: f64,
    pub variance_bound: f64,
    pub max_component_grad_norm: f64,
    pub value: f64,
}

impl ConstantsCheck {
    pub fn holds(&self, c: &ProblemConstants) -> bool {
        let rel = 1e-12 * (1.0 + self.variance_bound.abs());
        let bounded = c.grad_bound.is_none_or(|g| self.max_component_grad_norm <= g * (1.0 + 1e-12));
        self.variance <= self.variance_bound + rel && bounded && c.f_lower <= self.value
    }
}

/// Evaluates the variance inequality, the gradient bound and `f_lower ≤ F(w)` at `w`.
pub fn check_constants_at<P: Problem + ?Sized>(problem: &P, w: &[f64]) -> ConstantsCheck {
    let c = problem.constants();
    let full = problem.full_grad(w);
    let mut g = vec![0.0; problem.dim()];
    let mut variance = 0.0;
    let mut max_norm: f64 = 0.0;
    for i in 0..problem.n() {
        problem.component_grad_into(w, i, &mut g);
        variance += linalg::dist_sq(&g, &full);
        max_norm = max_norm.max(linalg::norm(&g));
    }
    variance /= problem.n() as f64;
    ConstantsCheck {
        variance,
        variance_bound: c.theta * linalg::norm_sq(&full) + c.sigma_sq,
        max_component_grad_norm: max_norm,
        value: problem.value(w),
    }
}

/// One labelled sample with sparse features; indices are 1-based and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSample {
    label: i8,
    features: Vec<(usize, f64)>,
}

impl SparseSample {
    pub fn new(label: i8, features: Vec<(usize, f64)>) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::invalid(format!("label must be +1 or -1, got {label}")));
        }
        let mut prev = 0usize;
        for &(idx, _) in &features {
            if idx <= prev {
                return Err(Error::invalid(format!(
                    "feature indices must be 1-based and strictly increasing (saw {idx} after {prev})"
                )));
            }
            prev = idx;
        }
        Ok(SparseSample { label, features })
    }

    pub fn label(&self) -> f64 {
        self.label as f64
    }

    pub fn label_sign(&self) -> i8 {
        self.label
    }

    pub fn features(&self) -> &[(usize, f64)] {
        &self.features
    }

    /// Largest feature index, 0 for an empty feature list.
    pub fn max_index(&self) -> usize {
        self.features.last().map_or(0, |&(i, _)| i)
    }

    pub fn norm_sq(&self) -> f64 {
        self.features.iter().map(|&(_, v)| v * v).sum()
    }

    /// `xᵀw` for a dense `w`; caller guarantees indices fit.
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.features.iter().map(|&(j, v)| v * w[j - 1]).sum()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.features.iter().find(|&&(j, _)| j > dim) {
            Some(&(index, _)) => Err(Error::FeatureIndexOutOfRange { index, dim }),
            None => Ok(()),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for &(j, v) in &self.features {
            x[j - 1] = v;
        }
        x
    }
}
