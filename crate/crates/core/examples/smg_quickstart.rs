//! Train regularized logistic regression with SMG under randomized reshuffling.
//!
//! `cargo run --example smg_quickstart`

use smg::dataio::synth_binary_dataset;
use smg::optimizers::initial_point;
use smg::{Algorithm, LogisticProblem, Problem, Schedule, ShufflingStrategy};

fn main() -> smg::Result<()> {
    let data = synth_binary_dataset(256, 10, 1, 0.9)?;
    let problem = LogisticProblem::new(data, None, 0.01)?;
    let schedule = Schedule::constant(1.0, 30)?;
    let w0 = initial_point(problem.dim(), 0, 0.01);

    let record = Algorithm::Smg { beta: 0.5 }.run(&problem, &schedule, ShufflingStrategy::random_reshuffling(0), &w0)?;
    for row in record.rows.iter().step_by(5) {
        println!("epoch {:>3}  eta {:.4}  loss {:.6}  |grad|^2 {:.3e}", row.epoch, row.eta, row.loss, row.grad_norm_sq);
    }
    println!("final loss {:.6}", record.final_loss);
    println!("output iterate drawn from epoch {}", record.selected_index + 1);
    Ok(())
}
