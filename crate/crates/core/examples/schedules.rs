//! Epoch learning-rate schedules, step-size caps and the sums used by the bounds.
//!
//! `cargo run --example schedules`

use smg::schedules::{cap_general, cap_rr, cap_smoothness};
use smg::Schedule;

fn main() -> smg::Result<()> {
    let horizon = 8;
    let schedules = [
        ("constant", Schedule::constant(0.5, horizon)?),
        ("diminishing", Schedule::diminishing(0.5, 2.0, horizon)?),
        ("exponential", Schedule::exponential(0.5, 0.1, horizon)?),
        ("cosine", Schedule::cosine(0.5, horizon)?),
    ];
    for (name, s) in &schedules {
        let etas: Vec<String> = s.etas().iter().map(|e| format!("{e:.4}")).collect();
        println!("{name:>12}: {}", etas.join(" "));
        let sums = s.sums();
        println!("{:>12}  sum eta {:.4}, sum eta_(t-1)^3 {:.5}", "", sums.sum_eta, sums.sum_eta_prev_cubed);
    }

    let rr = Schedule::constant(0.5, horizon)?.with_rr_scaling(27);
    println!("reshuffling-scaled constant rate for n = 27: {:.4}", rr.initial_eta());

    let l = 2.0;
    for beta in [0.0, 0.5, 0.9] {
        let k = cap_general(beta, 0.0, l)?;
        let d = cap_rr(beta, 0.0, 100, l)?;
        println!("beta {beta}: K = {:.1} (eta <= {:.4}), D = {:.2} (eta <= {:.4})", k.constant, k.max_eta, d.constant, d.max_eta);
    }
    println!("single-shuffle momentum cap: eta <= {}", cap_smoothness(l)?.max_eta);

    let mut s = Schedule::cosine(10.0, horizon)?;
    let cap = cap_general(0.5, 0.0, l)?;
    s.clamp_to(cap.max_eta);
    s.check_cap(&cap)?;
    println!("clamped cosine schedule starts at {:.4}", s.initial_eta());
    Ok(())
}
