//! Parse LIBSVM data and train on it. Pass a file path, or run without one to use
//! a small inline sample.
//!
//! `cargo run --example libsvm_ingest -- $SMG_DATA_DIR/w8a`

use std::path::PathBuf;

use smg::dataio::{load_libsvm, parse_libsvm};
use smg::optimizers::initial_point;
use smg::{Algorithm, LogisticProblem, Problem, Schedule, ShufflingStrategy};

const SAMPLE: &str = "\
+1 1:0.5 3:1.2
-1 2:0.7 4:-1.0
+1 1:1.1 2:-0.3 4:0.2
0 3:-0.8
";

fn main() -> smg::Result<()> {
    let (samples, dim) = match std::env::args_os().nth(1).map(PathBuf::from) {
        Some(path) => {
            let (samples, meta) = load_libsvm(&path)?;
            println!("{}", serde_json::to_string_pretty(&meta)?);
            (samples, meta.d)
        }
        None => parse_libsvm(SAMPLE.as_bytes())?,
    };
    println!("{} samples, dimension {dim}", samples.len());
    let problem = LogisticProblem::new(samples, Some(dim), 0.01)?;
    let c = problem.constants();
    println!("L = {:.4}, G = {:.4}", c.smoothness, c.grad_bound.unwrap_or(f64::INFINITY));
    let schedule = Schedule::constant(0.5, 5)?;
    let w0 = initial_point(problem.dim(), 0, 0.01);
    let record = Algorithm::Smg { beta: 0.5 }.run(&problem, &schedule, ShufflingStrategy::random_reshuffling(0), &w0)?;
    println!("loss {:.6} -> {:.6}", record.initial_loss(), record.final_loss);
    Ok(())
}
