//! Check the algebraic identities of the momentum updates from recorded gradients.
//!
//! `cargo run --example identity_suite`

use smg::audit::identity_suite;
use smg::{QuadraticMeanProblem, ShufflingStrategy};

fn main() -> smg::Result<()> {
    let problem = QuadraticMeanProblem::random(8, 3, 1)?;
    let report = identity_suite(&problem, 0.7, 8, ShufflingStrategy::random_reshuffling(2), &[1.0, -0.5, 2.0])?;
    for c in &report.checks {
        println!("{} {:<45} {:.2e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.max_deviation);
    }
    Ok(())
}
