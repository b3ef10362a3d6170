//! Binary logistic loss with the bounded nonconvex regularizer
//! `r(w) = ½ Σ_j w_j² / (1 + w_j²)`.

use super::{Problem, ProblemConstants, SparseSample};
use crate::error::{Error, Result};

/// `max_w |w| / (1 + w²)²`, attained at `w = 1/√3`; equals `3√3/16`.
pub const REGULARIZER_GRAD_PEAK: f64 = 0.324_759_526_419_164_9;

#[inline]
fn softplus_neg(z: f64) -> f64 {
    // log(1 + exp(-z))
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid_neg(z: f64) -> f64 {
    // 1 / (1 + exp(z))
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn regularizer(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|&x| x * x / (1.0 + x * x)).sum::<f64>()
}

/// `r′(w)_j = w_j / (1 + w_j²)²`
pub fn regularizer_grad(wj: f64) -> f64 {
    let q = 1.0 + wj * wj;
    wj / (q * q)
}

/// `f(w; x, y) = log(1 + exp(−y xᵀw)) + λ r(w)`
pub fn logistic_component_value(w: &[f64], sample: &SparseSample, lambda: f64) -> Result<f64> {
    sample.check_dim(w.len())?;
    Ok(softplus_neg(sample.label() * sample.dot(w)) + lambda * regularizer(w))
}

/// Dense gradient of [`logistic_component_value`] with respect to `w`.
pub fn logistic_component_grad(w: &[f64], sample: &SparseSample, lambda: f64) -> Result<Vec<f64>> {
    sample.check_dim(w.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let mut out = vec![0.0; w.len()];
    grad_into(w, sample, lambda, &mut out);
    Ok(out)
}

fn grad_into(w: &[f64], sample: &SparseSample, lambda: f64, out: &mut [f64]) {
    for (o, &wj) in out.iter_mut().zip(w) {
        *o = lambda * regularizer_grad(wj);
    }
    let y = sample.label();
    let coef = -y * sigmoid_neg(y * sample.dot(w));
    for &(j, v) in sample.features() {
        out[j - 1] += coef * v;
    }
}

/// Certified constants for the regularized logistic objective.
///
/// * `L = ¼ maxᵢ‖xᵢ‖² + λ` (logistic curvature ≤ ¼, `|r″| ≤ 1`)
/// * `G = maxᵢ‖xᵢ‖ + λ (3√3/16) √d`
/// * `Θ = 0`, `σ² = 4G²`, `f_lower = 0`
pub fn logistic_constants(dataset: &[SparseSample], lambda: f64, dim: usize) -> Result<ProblemConstants> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max_norm_sq = dataset.iter().map(SparseSample::norm_sq).fold(0.0, f64::max);
    let g = max_norm_sq.sqrt() + lambda * REGULARIZER_GRAD_PEAK * (dim as f64).sqrt();
    Ok(ProblemConstants {
        smoothness: 0.25 * max_norm_sq + lambda,
        grad_bound: Some(g),
        theta: 0.0,
        sigma_sq: 4.0 * g * g,
        f_lower: 0.0,
    })
}

/// Regularized logistic regression over a fixed dataset.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    samples: Vec<SparseSample>,
    dim: usize,
    lambda: f64,
    constants: ProblemConstants,
}

impl LogisticProblem {
    /// Builds the problem; `dim` defaults to the largest feature index.
    pub fn new(samples: Vec<SparseSample>, dim: Option<usize>, lambda: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        let inferred = samples.iter().map(SparseSample::max_index).max().unwrap_or(0);
        let dim = dim.unwrap_or(inferred);
        if dim == 0 {
            return Err(Error::invalid("problem dimension must be at least 1"));
        }
        for s in &samples {
            s.check_dim(dim)?;
        }
        let mut constants = logistic_constants(&samples, lambda, dim)?;
        if constants.smoothness <= 0.0 {
            // all-zero features and λ = 0: F is constant; any positive L is valid
            constants.smoothness = f64::MIN_POSITIVE;
        }
        Ok(LogisticProblem { samples, dim, lambda, constants })
    }

    pub fn samples(&self) -> &[SparseSample] {
        &self.samples
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Problem for LogisticProblem {
    fn n(&self) -> usize {
        self.samples.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn component_value(&self, w: &[f64], i: usize) -> f64 {
        let s = &self.samples[i];
        softplus_neg(s.label() * s.dot(w)) + self.lambda * regularizer(w)
    }

    fn component_grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        grad_into(w, &self.samples[i], self.lambda, out);
    }

    fn value(&self, w: &[f64]) -> f64 {
        let loss: f64 = self.samples.iter().map(|s| softplus_neg(s.label() * s.dot(w))).sum();
        loss / self.samples.len() as f64 + self.lambda * regularizer(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{check_constants_at, gradient_variance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1() -> SparseSample {
        SparseSample::new(1, vec![(1, 1.0)]).unwrap()
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
        (0..w.len())
            .map(|j| {
                let mut wp = w.to_vec();
                let mut wm = w.to_vec();
                wp[j] += h;
                wm[j] -= h;
                (f(&wp) - f(&wm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_at_origin_is_half_sigmoid() {
        let g = logistic_component_grad(&[0.0, 0.0, 0.0], &e1(), 0.01).unwrap();
        assert_eq!(g, vec![-0.5, 0.0, 0.0]);
    }

    #[test]
    fn regularizer_derivative_at_one() {
        assert_eq!(regularizer_grad(1.0), 0.25);
        let fd = central_diff(|w| 0.5 * w[0] * w[0] / (1.0 + w[0] * w[0]), &[1.0], 1e-6);
        assert!((fd[0] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn regularizer_peak_matches_grid_maximum() {
        let grid_max = (0..=200_000)
            .map(|k| regularizer_grad(k as f64 * 1e-5))
            .fold(0.0, f64::max);
        assert!((grid_max - REGULARIZER_GRAD_PEAK).abs() < 1e-9);
        assert!((REGULARIZER_GRAD_PEAK - 3.0 * 3f64.sqrt() / 16.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut feats: Vec<(usize, f64)> = Vec::new();
            for j in 1..=5 {
                if rng.random_bool(0.7) {
                    feats.push((j, rng.random_range(-1.5..1.5)));
                }
            }
            let label = if rng.random_bool(0.5) { 1 } else { -1 };
            let s = SparseSample::new(label, feats).unwrap();
            let g = logistic_component_grad(&w, &s, 0.01).unwrap();
            let fd = central_diff(|w| logistic_component_value(w, &s, 0.01).unwrap(), &w, 1e-5);
            let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
            assert!(err / scale <= 1e-6, "rel err {}", err / scale);
        }
    }

    #[test]
    fn out_of_range_index_is_named() {
        let s = SparseSample::new(1, vec![(2, 1.0), (7, 1.0)]).unwrap();
        match logistic_component_grad(&[0.0; 3], &s, 0.0) {
            Err(Error::FeatureIndexOutOfRange { index: 7, dim: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constants_single_unit_sample() {
        let c = logistic_constants(&[e1()], 0.0, 1).unwrap();
        assert_eq!(c.smoothness, 0.25);
        assert_eq!(c.grad_bound, Some(1.0));
        assert_eq!(c.sigma_sq, 4.0);
        assert_eq!(c.theta, 0.0);
        assert_eq!(c.f_lower, 0.0);

        // largest second derivative of log(1 + exp(-w)) on a grid
        let f = |w: f64| softplus_neg(w);
        let h = 1e-4;
        let peak = (-4000..=4000)
            .map(|k| {
                let w = k as f64 * 1e-3;
                ((f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h)).abs()
            })
            .fold(0.0, f64::max);
        assert!((peak - 0.25).abs() < 1e-5, "peak {peak}");
    }

    #[test]
    fn constants_regularizer_term_scales_with_sqrt_dim() {
        let c = logistic_constants(&[e1()], 0.01, 4).unwrap();
        let g = c.grad_bound.unwrap();
        assert!((g - (1.0 + 0.01 * 0.324_759_5 * 2.0)).abs() < 1e-9);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(logistic_constants(&[], 0.01, 3), Err(Error::EmptyDataset)));
        assert!(matches!(LogisticProblem::new(vec![], None, 0.01), Err(Error::EmptyDataset)));
    }

    #[test]
    fn variance_inequality_at_origin() {
        let samples = vec![
            SparseSample::new(1, vec![(1, 1.0), (2, -0.5)]).unwrap(),
            SparseSample::new(-1, vec![(2, 2.0)]).unwrap(),
            SparseSample::new(1, vec![(1, -1.0), (3, 0.3)]).unwrap(),
        ];
        let p = LogisticProblem::new(samples, None, 0.01).unwrap();
        let w = vec![0.0; 3];
        let chk = check_constants_at(&p, &w);
        assert!(chk.holds(p.constants()));
        assert!((chk.variance - gradient_variance(&p, &w)).abs() < 1e-15);
    }

    #[test]
    fn value_override_matches_component_mean() {
        let samples = vec![
            SparseSample::new(1, vec![(1, 1.0)]).unwrap(),
            SparseSample::new(-1, vec![(1, 0.5), (2, 2.0)]).unwrap(),
        ];
        let p = LogisticProblem::new(samples, None, 0.01).unwrap();
        let w = [0.3, -0.7];
        let mean = (p.component_value(&w, 0) + p.component_value(&w, 1)) / 2.0;
        assert!((p.value(&w) - mean).abs() < 1e-15);
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let s = SparseSample::new(1, vec![(1, 1.0)]).unwrap();
        for w in [-800.0, 800.0] {
            let v = logistic_component_value(&[w], &s, 0.0).unwrap();
            let g = logistic_component_grad(&[w], &s, 0.0).unwrap();
            assert!(v.is_finite() && g[0].is_finite());
        }
    }
}
