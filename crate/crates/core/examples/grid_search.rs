//! Coarse-then-fine learning-rate search with the reference grids.
//!
//! `cargo run --example grid_search`

use smg::cli::{reference_grids, run_reference_grid, ExperimentConfig, ProblemSpec, ScheduleSpec};
use smg::{Algorithm, ScheduleKind, ShufflingKind};

fn main() -> smg::Result<()> {
    let cfg = ExperimentConfig {
        problem: ProblemSpec::Synthetic { n: 64, d: 8, seed: 1, separability: 0.8, reg_lambda: 0.01 },
        algorithm: Algorithm::Smg { beta: 0.5 },
        schedule: ScheduleSpec { shape: ScheduleKind::Diminishing { lambda: 1.0 }, gamma: 0.1, rr_scaling: false },
        strategy: ShufflingKind::RandomReshuffling,
        horizon: 10,
        seed: 0,
        repeats: 2,
        enforce_cap: false,
        w0_scale: 0.01,
    };
    let grids = reference_grids(&cfg.algorithm, &cfg.schedule.shape);
    println!("coarse rates {:?}, offsets {:?}", grids.coarse_gammas, grids.lambdas);
    let rows = run_reference_grid(&cfg, 0)?;
    for (rank, row) in rows.iter().take(5).enumerate() {
        println!(
            "{:>2}. gamma {:<6} lambda {:<4} final loss {}",
            rank + 1,
            row.point.gamma,
            row.point.lambda.unwrap_or(f64::NAN),
            row.final_loss.map_or_else(|| "failed".to_string(), |l| format!("{l:.6}"))
        );
    }
    Ok(())
}
