use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::commands::{ensure_dir, execute, say, write_text};
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::optimizers::Algorithm;
use crate::schedules::ScheduleKind;

/// Hyper-parameters varied by a grid search; `None` keeps the base config's value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub point: GridPoint,
    /// Mean final train loss over the config's seeds; `None` when any run failed.
    pub final_loss: Option<f64>,
    pub weighted_grad_norm_sq: Option<f64>,
    pub failure: Option<String>,
}

/// Search grids used for the reference experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrids {
    pub coarse_gammas: Vec<f64>,
    /// Second-stage rates are `best_gamma × m` for each multiplier.
    pub fine_multipliers: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Per-epoch decay factors `α`; the schedule uses `ρ = α^T`.
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

pub fn reference_grids(algorithm: &Algorithm, shape: &ScheduleKind) -> ReferenceGrids {
    let coarse_gammas = match (shape, algorithm) {
        (ScheduleKind::Cosine, _) => vec![1.0, 0.1, 0.01, 0.001],
        (_, Algorithm::Sgd | Algorithm::Sgdm { .. }) => vec![0.1, 0.01, 0.001],
        (_, Algorithm::Smg { .. } | Algorithm::Ssmg { .. }) => vec![1.0, 0.1, 0.01],
        (_, Algorithm::Adam { .. }) => vec![0.01, 0.001, 0.0001],
    };
    let fine_multipliers = match algorithm {
        Algorithm::Adam { .. } => vec![2.0, 1.0, 0.5],
        _ => vec![5.0, 4.0, 2.0, 1.0, 0.8, 0.6, 0.5],
    };
    ReferenceGrids {
        coarse_gammas,
        fine_multipliers,
        lambdas: if matches!(shape, ScheduleKind::Diminishing { .. }) { vec![1.0, 2.0, 4.0, 8.0] } else { vec![] },
        alphas: if matches!(shape, ScheduleKind::Exponential { .. }) { vec![0.99, 0.995, 0.999] } else { vec![] },
        betas: if matches!(algorithm, Algorithm::Ssmg { .. }) { vec![0.1, 0.5, 0.9] } else { vec![] },
    }
}

/// Cartesian product; empty axes are left at the base value.
pub fn product(gammas: &[f64], lambdas: &[f64], rhos: &[f64], betas: &[f64]) -> Vec<GridPoint> {
    let opt = |xs: &[f64]| if xs.is_empty() { vec![None] } else { xs.iter().copied().map(Some).collect() };
    let mut points = Vec::new();
    for &gamma in gammas {
        for lambda in opt(lambdas) {
            for rho in opt(rhos) {
                for beta in opt(betas) {
                    points.push(GridPoint { gamma, lambda, rho, beta });
                }
            }
        }
    }
    points
}

pub fn apply_point(base: &ExperimentConfig, p: &GridPoint) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.schedule.gamma = p.gamma;
    match (&mut cfg.schedule.shape, p.lambda, p.rho) {
        (ScheduleKind::Diminishing { lambda }, Some(l), _) => *lambda = l,
        (ScheduleKind::Exponential { rho }, _, Some(r)) => *rho = r,
        _ => {}
    }
    if let Some(b) = p.beta {
        match &mut cfg.algorithm {
            Algorithm::Smg { beta } | Algorithm::Ssmg { beta } => *beta = b,
            Algorithm::Sgdm { momentum } => *momentum = b,
            _ => {}
        }
    }
    cfg
}

fn evaluate(base: &ExperimentConfig, p: &GridPoint) -> GridRow {
    match execute(&apply_point(base, p)) {
        Ok((_, _, records, _)) => {
            let k = records.len() as f64;
            let loss = records.iter().map(|r| r.final_loss).sum::<f64>() / k;
            let grad = records.iter().map(|r| r.weighted_grad_norm_sq()).sum::<f64>() / k;
            GridRow { point: *p, final_loss: Some(loss), weighted_grad_norm_sq: Some(grad), failure: None }
        }
        Err(e) => GridRow { point: *p, final_loss: None, weighted_grad_norm_sq: None, failure: Some(e.to_string()) },
    }
}

/// Failed points rank after every finished one; ties keep grid order.
fn rank(rows: &mut [GridRow]) {
    rows.sort_by(|a, b| match (a.final_loss, b.final_loss) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
}

/// Evaluates every point on a pool of `jobs` threads (0 = all cores) and returns
/// the rows ranked by mean final train loss.
pub fn run_grid(base: &ExperimentConfig, points: &[GridPoint], jobs: usize) -> Result<Vec<GridRow>> {
    if points.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let mut rows: Vec<GridRow> = pool.install(|| points.par_iter().map(|p| evaluate(base, p)).collect());
    rank(&mut rows);
    Ok(rows)
}

/// Two-stage search with [`reference_grids`]: the coarse grid, then the best rate
/// times each fine multiplier with the other axes fixed at their best values.
pub fn run_reference_grid(base: &ExperimentConfig, jobs: usize) -> Result<Vec<GridRow>> {
    let g = reference_grids(&base.algorithm, &base.schedule.shape);
    let rhos: Vec<f64> = g.alphas.iter().map(|a| a.powi(base.horizon as i32)).collect();
    let coarse = product(&g.coarse_gammas, &g.lambdas, &rhos, &g.betas);
    let mut rows = run_grid(base, &coarse, jobs)?;
    let best = rows[0].clone();
    if best.final_loss.is_some() {
        let fine: Vec<GridPoint> = g
            .fine_multipliers
            .iter()
            .map(|m| GridPoint { gamma: best.point.gamma * m, ..best.point })
            .filter(|p| !rows.iter().any(|r| r.point == *p))
            .collect();
        if !fine.is_empty() {
            rows.extend(run_grid(base, &fine, jobs)?);
            rank(&mut rows);
        }
    }
    Ok(rows)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Writes `grid.csv` ranked best first and prints the winner.
pub fn write_grid(rows: &[GridRow], out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    ensure_dir(out_dir)?;
    let mut csv = String::from("rank,gamma,lambda,rho,beta,final_loss,weighted_grad_norm_sq,failed,failure\n");
    for (k, r) in rows.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},\"{}\"",
            k + 1,
            r.point.gamma,
            fmt_opt(r.point.lambda),
            fmt_opt(r.point.rho),
            fmt_opt(r.point.beta),
            fmt_opt(r.final_loss),
            fmt_opt(r.weighted_grad_norm_sq),
            r.failure.is_some(),
            r.failure.as_deref().unwrap_or("").replace('"', "'")
        )
        .expect("write to String");
    }
    write_text(&out_dir.join("grid.csv"), &csv)?;
    let best = &rows[0];
    match best.final_loss {
        Some(l) => say(out, format!("best {:?}  final loss {l:.6e}", best.point)),
        None => say(out, "every grid point failed"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{ProblemSpec, ScheduleSpec};
    use crate::shuffling::ShufflingKind;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSpec::Synthetic { n: 16, d: 3, seed: 2, separability: 0.9, reg_lambda: 0.01 },
            algorithm: Algorithm::Smg { beta: 0.5 },
            schedule: ScheduleSpec { shape: ScheduleKind::Constant, gamma: 0.1, rr_scaling: false },
            strategy: ShufflingKind::RandomReshuffling,
            horizon: 5,
            seed: 0,
            repeats: 2,
            enforce_cap: false,
            w0_scale: 0.01,
        }
    }

    #[test]
    fn single_point_grid() {
        let p = GridPoint { gamma: 0.3, lambda: None, rho: None, beta: None };
        let rows = run_grid(&base(), &[p], 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].point, p);
        assert!(rows[0].final_loss.is_some());
    }

    #[test]
    fn divergent_point_ranks_last() {
        let pts = product(&[1e300, 0.5, 0.1], &[], &[], &[]);
        let rows = run_grid(&base(), &pts, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[..2].iter().all(|r| r.final_loss.is_some()));
        assert_eq!(rows[2].point.gamma, 1e300);
        assert!(rows[2].failure.is_some());
    }

    #[test]
    fn reference_grid_values() {
        let smg = reference_grids(&Algorithm::Smg { beta: 0.5 }, &ScheduleKind::Constant);
        assert_eq!(smg.coarse_gammas, [1.0, 0.1, 0.01]);
        let fine: Vec<f64> = smg.fine_multipliers.iter().map(|m| 0.1 * m).collect();
        for (a, b) in fine.iter().zip([0.5, 0.4, 0.2, 0.1, 0.08, 0.06, 0.05]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(reference_grids(&Algorithm::Sgd, &ScheduleKind::Constant).coarse_gammas, [0.1, 0.01, 0.001]);
        assert_eq!(reference_grids(&Algorithm::sgdm_default(), &ScheduleKind::Constant).coarse_gammas, [0.1, 0.01, 0.001]);
        let adam = reference_grids(&Algorithm::adam_default(), &ScheduleKind::Constant);
        assert_eq!(adam.coarse_gammas, [0.01, 0.001, 0.0001]);
        let adam_fine: Vec<f64> = adam.fine_multipliers.iter().map(|m| 0.001 * m).collect();
        assert_eq!(adam_fine, [0.002, 0.001, 0.0005]);
        let dim = reference_grids(&Algorithm::Smg { beta: 0.5 }, &ScheduleKind::Diminishing { lambda: 1.0 });
        assert_eq!(dim.lambdas, [1.0, 2.0, 4.0, 8.0]);
        let exp = reference_grids(&Algorithm::Smg { beta: 0.5 }, &ScheduleKind::Exponential { rho: 0.5 });
        assert_eq!(exp.alphas, [0.99, 0.995, 0.999]);
        let cos = reference_grids(&Algorithm::Sgd, &ScheduleKind::Cosine);
        assert_eq!(cos.coarse_gammas, [1.0, 0.1, 0.01, 0.001]);
        assert_eq!(reference_grids(&Algorithm::Ssmg { beta: 0.5 }, &ScheduleKind::Constant).betas, [0.1, 0.5, 0.9]);
    }

    #[test]
    fn reference_grid_search_runs_both_stages() {
        let rows = run_reference_grid(&base(), 0).unwrap();
        assert!(rows.len() > 3);
        assert!(rows.windows(2).all(|w| match (w[0].final_loss, w[1].final_loss) {
            (Some(a), Some(b)) => a <= b,
            (None, Some(_)) => false,
            _ => true,
        }));
    }
}
