//! Inner-step update rules. Each rule owns its buffers; `step` never allocates.

use crate::linalg;

/// One optimizer's per-component update, driven by [`super::run_with_observer`].
pub trait InnerRule {
    fn name(&self) -> &'static str;

    /// Called before the first inner step of epoch `t`.
    fn begin_epoch(&mut self, _t: usize) {}

    /// Applies one update given `g = ∇f(w; π(i+1))` and the per-step size `η_t / n`.
    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64);

    /// Called after the last inner step of an epoch.
    fn end_epoch(&mut self) {}

    /// Search direction used by the most recent step, if the rule keeps one.
    fn momentum(&self) -> Option<&[f64]> {
        None
    }

    /// Epoch-fixed anchor `m₀` (SMG only).
    fn anchor(&self) -> Option<&[f64]> {
        None
    }
}

/// Shuffling momentum gradient: the momentum anchor is frozen for an epoch
/// and refreshed from the running average `v` of that epoch's gradients.
///
/// ```text
/// m ← β m₀ + (1 − β) g
/// v ← v + g / n
/// w ← w − (η_t / n) m
/// ```
#[derive(Debug, Clone)]
pub struct SmgRule {
    beta: f64,
    inv_n: f64,
    anchor: Vec<f64>,
    average: Vec<f64>,
    momentum: Vec<f64>,
}

impl SmgRule {
    pub fn new(beta: f64, n: usize, dim: usize) -> Self {
        SmgRule {
            beta,
            inv_n: 1.0 / n as f64,
            anchor: vec![0.0; dim],
            average: vec![0.0; dim],
            momentum: vec![0.0; dim],
        }
    }

    /// Running gradient average `v` of the current epoch.
    pub fn average(&self) -> &[f64] {
        &self.average
    }
}

impl InnerRule for SmgRule {
    fn name(&self) -> &'static str {
        "smg"
    }

    fn begin_epoch(&mut self, _t: usize) {
        self.average.iter_mut().for_each(|v| *v = 0.0);
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64) {
        let (beta, inv_n) = (self.beta, self.inv_n);
        for k in 0..w.len() {
            let m = beta * self.anchor[k] + (1.0 - beta) * grad[k];
            self.momentum[k] = m;
            self.average[k] += inv_n * grad[k];
            w[k] -= step_size * m;
        }
    }

    fn end_epoch(&mut self) {
        std::mem::swap(&mut self.anchor, &mut self.average);
    }

    fn momentum(&self) -> Option<&[f64]> {
        Some(&self.momentum)
    }

    fn anchor(&self) -> Option<&[f64]> {
        Some(&self.anchor)
    }
}

/// Classical recursive momentum carried across epochs:
/// `m ← β m + (1 − β) g`, `w ← w − (η_t / n) m`.
#[derive(Debug, Clone)]
pub struct SsmgRule {
    beta: f64,
    momentum: Vec<f64>,
}

impl SsmgRule {
    pub fn new(beta: f64, dim: usize) -> Self {
        SsmgRule { beta, momentum: vec![0.0; dim] }
    }
}

impl InnerRule for SsmgRule {
    fn name(&self) -> &'static str {
        "ssmg"
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64) {
        let beta = self.beta;
        for k in 0..w.len() {
            let m = beta * self.momentum[k] + (1.0 - beta) * grad[k];
            self.momentum[k] = m;
            w[k] -= step_size * m;
        }
    }

    fn momentum(&self) -> Option<&[f64]> {
        Some(&self.momentum)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SgdRule;

impl InnerRule for SgdRule {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64) {
        linalg::axpy(-step_size, grad, w);
    }
}

/// Heavy-ball momentum `m ← μ m + g`, `w ← w − (η_t / n) m`.
#[derive(Debug, Clone)]
pub struct SgdmRule {
    momentum_coef: f64,
    momentum: Vec<f64>,
}

impl SgdmRule {
    pub fn new(momentum_coef: f64, dim: usize) -> Self {
        SgdmRule { momentum_coef, momentum: vec![0.0; dim] }
    }
}

impl InnerRule for SgdmRule {
    fn name(&self) -> &'static str {
        "sgdm"
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64) {
        let mu = self.momentum_coef;
        for k in 0..w.len() {
            let m = mu * self.momentum[k] + grad[k];
            self.momentum[k] = m;
            w[k] -= step_size * m;
        }
    }

    fn momentum(&self) -> Option<&[f64]> {
        Some(&self.momentum)
    }
}

/// Adam with bias correction; the step counter runs across epochs.
#[derive(Debug, Clone)]
pub struct AdamRule {
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamRule {
    pub fn new(beta1: f64, beta2: f64, eps: f64, dim: usize) -> Self {
        AdamRule { beta1, beta2, eps, steps: 0, first: vec![0.0; dim], second: vec![0.0; dim] }
    }
}

impl InnerRule for AdamRule {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], step_size: f64) {
        self.steps = self.steps.saturating_add(1);
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.steps);
        let c2 = 1.0 - b2.powi(self.steps);
        for k in 0..w.len() {
            let g = grad[k];
            self.first[k] = b1 * self.first[k] + (1.0 - b1) * g;
            self.second[k] = b2 * self.second[k] + (1.0 - b2) * g * g;
            let m_hat = self.first[k] / c1;
            let v_hat = self.second[k] / c2;
            w[k] -= step_size * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    fn momentum(&self) -> Option<&[f64]> {
        Some(&self.first)
    }
}
