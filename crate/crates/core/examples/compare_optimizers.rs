//! Loss curves of SMG, single-shuffle momentum, SGD, heavy-ball SGD and Adam from
//! one initial point over shared seeds.
//!
//! `cargo run --example compare_optimizers`

use smg::cli::{compare, CompareEntry, ExperimentConfig, ProblemSpec, ScheduleSpec};
use smg::{Algorithm, ScheduleKind, ShufflingKind};

fn main() -> smg::Result<()> {
    let cfg = ExperimentConfig {
        problem: ProblemSpec::Synthetic { n: 200, d: 20, seed: 5, separability: 0.8, reg_lambda: 0.01 },
        algorithm: Algorithm::Smg { beta: 0.5 },
        schedule: ScheduleSpec { shape: ScheduleKind::Constant, gamma: 0.5, rr_scaling: false },
        strategy: ShufflingKind::RandomReshuffling,
        horizon: 20,
        seed: 0,
        repeats: 5,
        enforce_cap: false,
        w0_scale: 0.01,
    };
    let entries = [
        CompareEntry { label: "smg", algorithm: Algorithm::Smg { beta: 0.5 }, gamma: 0.5 },
        CompareEntry { label: "ssmg", algorithm: Algorithm::Ssmg { beta: 0.5 }, gamma: 0.5 },
        CompareEntry { label: "sgd", algorithm: Algorithm::Sgd, gamma: 0.5 },
        CompareEntry { label: "sgdm", algorithm: Algorithm::sgdm_default(), gamma: 0.05 },
        CompareEntry { label: "adam", algorithm: Algorithm::adam_default(), gamma: 0.01 },
    ];
    let cmp = compare(&cfg, &entries)?;
    print!("epoch");
    for l in &cmp.labels {
        print!("  {l:>10}");
    }
    println!();
    for k in (0..=cfg.horizon).step_by(4) {
        print!("{k:>5}");
        for m in 0..cmp.labels.len() {
            print!("  {:>10.6}", cmp.loss_mean[m][k]);
        }
        println!();
    }
    Ok(())
}
