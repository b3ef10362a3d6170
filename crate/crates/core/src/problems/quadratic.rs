use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Problem, ProblemConstants};
use crate::error::{Error, Result};
use crate::linalg;

/// `f(w; i) = ½ (w − cᵢ)ᵀ A (w − cᵢ)` with a shared SPD curvature `A`.
///
/// Since `∇f(w;i) − ∇F(w) = A(c̄ − cᵢ)` does not depend on `w`, every constant
/// is exact: `L = λ_max(A)`, `Θ = 0`, `σ² = (1/n) Σ ‖A(c̄ − cᵢ)‖²` and
/// `F_* = F(c̄)`. Component gradients are unbounded.
#[derive(Debug, Clone)]
pub struct QuadraticMeanProblem {
    centers: Vec<Vec<f64>>,
    mean_center: Vec<f64>,
    /// row-major `d × d`
    curvature: Vec<f64>,
    dim: usize,
    min_value: f64,
    constants: ProblemConstants,
}

impl QuadraticMeanProblem {
    pub fn new(centers: Vec<Vec<f64>>, curvature: Vec<Vec<f64>>) -> Result<Self> {
        let n = centers.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let dim = centers[0].len();
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if let Some(c) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
        }
        if curvature.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: curvature.len() });
        }
        if let Some(row) = curvature.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
        let flat: Vec<f64> = curvature.iter().flatten().copied().collect();
        let a = DMatrix::from_row_slice(dim, dim, &flat);
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + a.abs().max()) {
            return Err(Error::invalid("curvature matrix must be symmetric"));
        }
        if a.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        let eig = a.symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let lambda_max = eig.eigenvalues.max();

        let mut mean_center = vec![0.0; dim];
        for c in &centers {
            linalg::axpy(1.0 / n as f64, c, &mut mean_center);
        }

        let mut p = QuadraticMeanProblem {
            centers,
            mean_center,
            curvature: flat,
            dim,
            min_value: 0.0,
            constants: ProblemConstants {
                smoothness: lambda_max,
                grad_bound: None,
                theta: 0.0,
                sigma_sq: 0.0,
                f_lower: 0.0,
            },
        };
        let mut sigma_sq = 0.0;
        let mut min_value = 0.0;
        let mut diff = vec![0.0; dim];
        let mut ad = vec![0.0; dim];
        for c in &p.centers {
            for k in 0..dim {
                diff[k] = p.mean_center[k] - c[k];
            }
            p.apply_curvature(&diff, &mut ad);
            sigma_sq += linalg::norm_sq(&ad);
            min_value += 0.5 * linalg::dot(&diff, &ad);
        }
        p.constants.sigma_sq = sigma_sq / n as f64;
        p.min_value = min_value / n as f64;
        p.constants.f_lower = p.min_value;
        Ok(p)
    }

    /// `A = s·I`.
    pub fn isotropic(centers: Vec<Vec<f64>>, s: f64) -> Result<Self> {
        let dim = centers.first().map_or(0, Vec::len);
        let a = (0..dim)
            .map(|r| (0..dim).map(|c| if r == c { s } else { 0.0 }).collect())
            .collect();
        Self::new(centers, a)
    }

    /// Seeded fixture: standard-normal centers and `A = BᵀB/d + ½I` with Gaussian `B`.
    pub fn random(n: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let centers: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| draw()).collect()).collect();
        let b: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| draw()).collect()).collect();
        let a = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| {
                        let btb: f64 = (0..dim).map(|k| b[k][r] * b[k][c]).sum();
                        btb / dim as f64 + if r == c { 0.5 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        Self::new(centers, a)
    }

    pub fn mean_center(&self) -> &[f64] {
        &self.mean_center
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Exact `F_* = F(c̄)`.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    fn apply_curvature(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(&self.curvature[r * self.dim..(r + 1) * self.dim], x);
        }
    }
}

impl Problem for QuadraticMeanProblem {
    fn n(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    fn component_value(&self, w: &[f64], i: usize) -> f64 {
        let diff: Vec<f64> = w.iter().zip(&self.centers[i]).map(|(a, b)| a - b).collect();
        let mut ad = vec![0.0; self.dim];
        self.apply_curvature(&diff, &mut ad);
        0.5 * linalg::dot(&diff, &ad)
    }

    fn component_grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let c = &self.centers[i];
        for (o, row) in out.iter_mut().zip(self.curvature.chunks_exact(self.dim)) {
            *o = row.iter().zip(w).zip(c).map(|((a, wk), ck)| a * (wk - ck)).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gradient_variance;

    #[test]
    fn identical_centers_have_no_variance() {
        let c = vec![1.0, -2.0];
        let p = QuadraticMeanProblem::isotropic(vec![c.clone(); 4], 3.0).unwrap();
        assert_eq!(p.constants().sigma_sq, 0.0);
        assert_eq!(p.min_value(), 0.0);
        assert_eq!(p.value(&c), 0.0);
    }

    #[test]
    fn two_symmetric_centers() {
        let p = QuadraticMeanProblem::isotropic(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 1.0).unwrap();
        // F(0) = (1/2)(½·1 + ½·1)
        assert_eq!(p.min_value(), 0.5);
        assert_eq!(p.value(&[0.0, 0.0]), 0.5);
        assert_eq!(p.constants().sigma_sq, 1.0);
        assert_eq!(p.constants().smoothness, 1.0);
        assert_eq!(p.constants().grad_bound, None);

        // grid minimisation agrees with the analytic minimum
        let grid_min = (-200..=200)
            .flat_map(|a| (-200..=200).map(move |b| [a as f64 * 0.01, b as f64 * 0.01]))
            .map(|w| p.value(&w))
            .fold(f64::INFINITY, f64::min);
        assert!((grid_min - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_grad_vanishes_at_mean_center() {
        let p = QuadraticMeanProblem::random(8, 3, 5).unwrap();
        let g = p.full_grad(p.mean_center());
        assert!(g.iter().all(|x| x.abs() <= 1e-14), "{g:?}");
    }

    #[test]
    fn sigma_matches_direct_variance() {
        let p = QuadraticMeanProblem::random(8, 3, 1).unwrap();
        for w in [vec![0.0; 3], vec![5.0, -3.0, 1.0]] {
            let v = gradient_variance(&p, &w);
            assert!((v - p.constants().sigma_sq).abs() < 1e-12 * (1.0 + v));
        }
    }

    #[test]
    fn rejects_indefinite_curvature() {
        let r = QuadraticMeanProblem::new(vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(r, Err(Error::NotPositiveDefinite)));
        let r = QuadraticMeanProblem::new(vec![vec![0.0, 0.0]], vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(r, Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let r = QuadraticMeanProblem::new(vec![vec![0.0, 0.0], vec![1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
