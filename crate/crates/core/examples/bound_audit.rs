//! Audit SMG runs on an exactly solvable quadratic against the convergence bounds.
//!
//! `cargo run --example bound_audit`

use smg::audit::{audit_theorem1, audit_theorem2};
use smg::optimizers::initial_point;
use smg::schedules::{cap_general, cap_rr};
use smg::{Algorithm, Error, Problem, QuadraticMeanProblem, RunRecord, Schedule, ShufflingStrategy};

fn main() -> smg::Result<()> {
    let problem = QuadraticMeanProblem::random(8, 3, 2024)?;
    let c = *problem.constants();
    println!("L = {:.4}, sigma^2 = {:.4}, F_* = {:.4}", c.smoothness, c.sigma_sq, c.f_lower);
    let w0 = initial_point(3, 1, 1.0);
    let beta = 0.5;

    // fixed permutation: deterministic bound
    let cap = cap_general(beta, c.theta, c.smoothness)?;
    let schedule = Schedule::constant(0.9 * cap.max_eta * 64f64.cbrt(), 64)?;
    let record = Algorithm::Smg { beta }.run(&problem, &schedule, ShufflingStrategy::incremental(), &w0)?;
    println!("{}", audit_theorem1(&record, &c, beta, problem.n())?.summary());

    // reshuffling: bound on the expectation, averaged over seeds
    let cap = cap_rr(beta, c.theta, problem.n(), c.smoothness)?;
    let schedule = Schedule::constant(cap.max_eta, 64)?;
    let records = (0..50)
        .map(|seed| Algorithm::Smg { beta }.run(&problem, &schedule, ShufflingStrategy::random_reshuffling(seed), &w0))
        .collect::<smg::Result<Vec<RunRecord>>>()?;
    let report = audit_theorem2(&records, &c, beta, problem.n())?;
    println!("{}", report.summary());
    println!("{}", serde_json::to_string_pretty(&report)?);

    // a rate above the cap is refused rather than audited
    let too_fast = Schedule::constant(10.0, 8)?;
    let record = Algorithm::Smg { beta }.run(&problem, &too_fast, ShufflingStrategy::incremental(), &w0)?;
    match audit_theorem1(&record, &c, beta, problem.n()) {
        Err(Error::PremisesUnmet(why)) => println!("refused: {why}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
