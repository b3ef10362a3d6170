//! Empirical convergence rate: log-log slope of the weighted gradient norm against T.
//!
//! `cargo run --example rate_fit`

use smg::audit::{fit_rate, RateConfig};
use smg::dataio::synth_binary_dataset;
use smg::optimizers::initial_point;
use smg::{Algorithm, LogisticProblem, ShufflingKind};

fn main() -> smg::Result<()> {
    let problem = LogisticProblem::new(synth_binary_dataset(32, 5, 7, 0.9)?, Some(5), 0.01)?;
    let config = RateConfig {
        algorithm: Algorithm::Smg { beta: 0.5 },
        gamma: 1.0,
        strategy: ShufflingKind::RandomReshuffling,
        seeds: (0..5).collect(),
        w0: initial_point(5, 0, 0.01),
    };
    let fit = fit_rate(&problem, &config, &[8, 16, 32, 64, 128, 256, 512])?;
    for (t, m) in fit.horizons.iter().zip(&fit.metrics) {
        println!("T = {t:>3}  median metric {m:.4e}");
    }
    println!("slope {:.3} (reference -2/3)", fit.slope);
    Ok(())
}
