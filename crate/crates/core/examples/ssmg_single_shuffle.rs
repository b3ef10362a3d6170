//! Single-shuffle momentum with the horizon-dependent momentum weight, audited
//! against its bounded-gradient bound.
//!
//! `cargo run --example ssmg_single_shuffle`

use smg::audit::{audit_theorem3, ssmg_beta};
use smg::dataio::synth_binary_dataset;
use smg::optimizers::initial_point;
use smg::schedules::cap_smoothness;
use smg::{Algorithm, LogisticProblem, Problem, Schedule, ShufflingStrategy};

fn main() -> smg::Result<()> {
    let problem = LogisticProblem::new(synth_binary_dataset(32, 5, 7, 0.9)?, Some(5), 0.01)?;
    let c = *problem.constants();
    println!("L = {:.4}, G = {:.4}", c.smoothness, c.grad_bound.unwrap_or(f64::INFINITY));
    let w0 = initial_point(5, 0, 0.01);
    for horizon in [16usize, 64, 256] {
        let beta = ssmg_beta(0.1, horizon, problem.n())?;
        let eta = cap_smoothness(c.smoothness)?.max_eta;
        let schedule = Schedule::constant(eta * (horizon as f64).cbrt(), horizon)?;
        let record = Algorithm::Ssmg { beta }.run(&problem, &schedule, ShufflingStrategy::shuffle_once(3), &w0)?;
        let report = audit_theorem3(&record, &c, beta, problem.n())?;
        println!("T = {horizon:>3}  beta = {beta:.4}  {}", report.summary());
    }
    Ok(())
}
