//! Convergence-bound audits, algebraic identity checks and empirical rate fits.
//!
//! Audits compare a finished run's weighted average `Σ η_t ‖∇F(w̃_{t−1})‖² / Σ η_t`
//! with a theorem's right-hand side, evaluated from the problem's certified
//! constants. When a run violates a theorem's premises the audit returns
//! [`Error::PremisesUnmet`](crate::Error::PremisesUnmet) instead of a vacuous report.

mod bounds;
mod identities;
mod rate;

pub use bounds::{
    audit_theorem1, audit_theorem2, audit_theorem3, ssmg_beta, theorem1_formula, theorem1_rhs, theorem2_formula,
    theorem2_rhs, theorem3_formula, theorem3_rhs, BoundReport, ConstantsUsed, Theorem, DETERMINISTIC_TOLERANCE,
    MONTE_CARLO_SIGMAS,
};
pub use identities::{
    cosine_sum_deviation, identity_suite, IdentityCheck, IdentityReport, COSINE_SUM_MAX_HORIZON,
    IDENTITY_TOLERANCE, MAX_RECORDED_STEPS,
};
pub use rate::{fit_power_law, fit_rate, horizon_metrics, RateConfig, RateFit, MIN_CONFIDENT_POINTS};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::optimizers::{Algorithm, RunRecord};
    use crate::problems::{LogisticProblem, Problem, ProblemConstants, QuadraticMeanProblem, SparseSample};
    use crate::schedules::{cap_general, cap_rr, Schedule, ScheduleSums};
    use crate::shuffling::ShufflingStrategy;

    fn quad() -> QuadraticMeanProblem {
        QuadraticMeanProblem::random(8, 3, 11).unwrap()
    }

    fn smg_record(p: &QuadraticMeanProblem, beta: f64, horizon: usize, strategy: ShufflingStrategy) -> RunRecord {
        let c = p.constants();
        let cap = cap_general(beta, c.theta, c.smoothness).unwrap();
        let schedule = Schedule::constant(0.9 * cap.max_eta * (horizon as f64).cbrt(), horizon).unwrap();
        Algorithm::Smg { beta }.run(p, &schedule, strategy, &[1.0, -1.0, 2.0]).unwrap()
    }

    #[test]
    fn zero_variance_leaves_only_the_gap_term() {
        let p = QuadraticMeanProblem::isotropic(vec![vec![1.0, 2.0, 3.0]; 8], 2.0).unwrap();
        assert_eq!(p.constants().sigma_sq, 0.0);
        let beta = 0.5;
        let rec = smg_record(&p, beta, 16, ShufflingStrategy::incremental());
        let rhs = theorem1_rhs(&rec, p.constants(), beta).unwrap();
        let gap = rec.initial_loss() - p.constants().f_lower;
        assert_eq!(rhs, 4.0 * gap / ((1.0 - beta) * rec.sum_eta()));
    }

    #[test]
    fn constant_rate_matches_closed_form_rates() {
        let c = ProblemConstants { smoothness: 2.0, grad_bound: None, theta: 0.0, sigma_sq: 0.7, f_lower: 0.0 };
        let (gamma, big_t, n, gap) = (0.05_f64, 27usize, 8usize, 3.0);
        let tf = big_t as f64;
        let sums = ScheduleSums::from_etas(&vec![gamma / tf.cbrt(); big_t]);
        let t1 = theorem1_formula(gap, &c, 0.0, &sums);
        let t1_closed = (4.0 * gap / gamma + 9.0 * c.sigma_sq * 4.0 * 5.0 * gamma * gamma) / tf.powf(2.0 / 3.0);
        assert!((t1 - t1_closed).abs() <= 1e-12 * t1_closed);

        let nf = n as f64;
        let g_rr = gamma * nf.cbrt();
        let sums = ScheduleSums::from_etas(&vec![g_rr / tf.cbrt(); big_t]);
        let t2 = theorem2_formula(gap, &c, 0.0, n, &sums);
        let t2_closed =
            (4.0 * gap / gamma + 6.0 * c.sigma_sq * 5.0 * 4.0 * gamma * gamma) / (nf.cbrt() * tf.powf(2.0 / 3.0));
        assert!((t2 - t2_closed).abs() <= 1e-12 * t2_closed);
    }

    #[test]
    fn reshuffling_variance_term_ratio() {
        let c = ProblemConstants { smoothness: 1.5, grad_bound: None, theta: 0.0, sigma_sq: 2.0, f_lower: 1.0 };
        let sums = ScheduleSums::from_etas(&[0.1, 0.05, 0.02]);
        for n in [1usize, 3, 10, 100] {
            // gap 0 isolates the variance terms
            let r = theorem2_formula(1.0, &c, 0.0, n, &sums) / theorem1_formula(1.0, &c, 0.0, &sums);
            assert!((r - 2.0 / (3.0 * n as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn ssmg_beta_power() {
        for (nu, t, n) in [(0.1, 64usize, 32usize), (1.0, 8, 4), (0.5, 1000, 100)] {
            let b = ssmg_beta(nu, t, n).unwrap();
            assert!((b.powi(n as i32) - nu / (t as f64).powf(2.0 / 3.0)).abs() < 1e-12);
        }
        assert!(ssmg_beta(5.0, 1, 3).is_err());
    }

    #[test]
    fn zero_beta_has_no_residual() {
        let c = ProblemConstants { smoothness: 1.0, grad_bound: Some(2.0), theta: 0.0, sigma_sq: 1.0, f_lower: 0.0 };
        let sums = ScheduleSums::from_etas(&[0.5; 4]);
        let got = theorem3_formula(1.0, 0.5, &c, 2.0, 0.0, 10, 0.5, &sums);
        let delta1 = 2.0 + 1.5 * 0.5 + 2.0 * 0.25 * 4.0;
        let expected = delta1 / 2.0 + 4.0 * 0.125 * 4.0 / 2.0;
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn rhs_monotone_in_variance_and_lower_bound() {
        let p = quad();
        let beta = 0.3;
        let rec = smg_record(&p, beta, 16, ShufflingStrategy::incremental());
        let base = *p.constants();
        let rhs = theorem1_rhs(&rec, &base, beta).unwrap();
        let more_var = ProblemConstants { sigma_sq: base.sigma_sq * 1.1, ..base };
        let lower = ProblemConstants { f_lower: base.f_lower - 0.1 * base.f_lower.abs().max(1.0), ..base };
        assert!(theorem1_rhs(&rec, &more_var, beta).unwrap() >= rhs);
        assert!(theorem1_rhs(&rec, &lower, beta).unwrap() >= rhs);

        let sums = ScheduleSums::from_etas(&rec.etas());
        let f0 = rec.initial_loss();
        assert!(theorem2_formula(f0, &more_var, beta, 8, &sums) >= theorem2_formula(f0, &base, beta, 8, &sums));
        assert!(theorem2_formula(f0, &lower, beta, 8, &sums) >= theorem2_formula(f0, &base, beta, 8, &sums));
        let g = ProblemConstants { grad_bound: Some(5.0), ..base };
        let g_lower = ProblemConstants { f_lower: lower.f_lower, ..g };
        assert!(
            theorem3_formula(f0, 1.0, &g_lower, 5.0, beta, 8, 0.1, &sums)
                >= theorem3_formula(f0, 1.0, &g, 5.0, beta, 8, 0.1, &sums)
        );
    }

    #[test]
    fn deterministic_smg_audit_holds() {
        let p = quad();
        for beta in [0.0, 0.5] {
            let rec = smg_record(&p, beta, 32, ShufflingStrategy::incremental());
            let report = audit_theorem1(&rec, p.constants(), beta, 8).unwrap();
            assert!(report.satisfied, "{}", report.summary());
            assert!(report.slack > 0.0 && report.lhs >= 0.0);
        }
    }

    #[test]
    fn premises_unmet_is_refused() {
        let p = quad();
        let c = p.constants();
        let beta = 0.5;
        let cap = cap_general(beta, c.theta, c.smoothness).unwrap();
        let too_big = Schedule::constant(3.0 * cap.max_eta, 5).unwrap();
        let rec = Algorithm::Smg { beta }.run(&p, &too_big, ShufflingStrategy::incremental(), &[0.0; 3]).unwrap();
        assert!(matches!(audit_theorem1(&rec, c, beta, 8), Err(Error::PremisesUnmet(_))));

        let increasing = Schedule::custom(vec![0.5 * cap.max_eta, cap.max_eta]).unwrap();
        let rec = Algorithm::Smg { beta }.run(&p, &increasing, ShufflingStrategy::incremental(), &[0.0; 3]).unwrap();
        assert!(matches!(audit_theorem1(&rec, c, beta, 8), Err(Error::PremisesUnmet(_))));

        // reshuffling bound needs reshuffled runs, single-shuffle bound needs finite G
        let ok = smg_record(&p, beta, 4, ShufflingStrategy::incremental());
        assert!(matches!(audit_theorem2(std::slice::from_ref(&ok), c, beta, 8), Err(Error::PremisesUnmet(_))));
        assert!(matches!(audit_theorem3(&ok, c, beta, 8), Err(Error::PremisesUnmet(_))));
        assert!(matches!(theorem1_rhs(&ok, c, 1.0), Err(Error::PremisesUnmet(_))));
    }

    #[test]
    fn reshuffled_expectation_audit() {
        let p = quad();
        let c = p.constants();
        let beta = 0.5;
        let cap = cap_rr(beta, c.theta, 8, c.smoothness).unwrap();
        let schedule = Schedule::constant(cap.max_eta, 16).unwrap();
        let records: Vec<RunRecord> = (0..20)
            .map(|s| Algorithm::Smg { beta }.run(&p, &schedule, ShufflingStrategy::random_reshuffling(s), &[1.0; 3]))
            .collect::<Result<_, _>>()
            .unwrap();
        let report = audit_theorem2(&records, c, beta, 8).unwrap();
        assert_eq!(report.constants_used.samples, 20);
        assert!(report.constants_used.monte_carlo_allowance > 0.0);
        assert!(report.satisfied, "{}", report.summary());
    }

    #[test]
    fn single_shuffle_audit_on_logistic() {
        let samples: Vec<SparseSample> = (0..6)
            .map(|i| SparseSample::new(if i % 2 == 0 { 1 } else { -1 }, vec![(1, 1.0 + i as f64), (2, -0.5)]).unwrap())
            .collect();
        let p = LogisticProblem::new(samples, None, 0.01).unwrap();
        let beta = ssmg_beta(0.1, 16, 6).unwrap();
        let schedule = Schedule::constant(1.0 / p.constants().smoothness, 16).unwrap();
        let rec = Algorithm::Ssmg { beta }.run(&p, &schedule, ShufflingStrategy::shuffle_once(3), &[0.1, 0.1]).unwrap();
        let report = audit_theorem3(&rec, p.constants(), beta, 6).unwrap();
        assert!(report.satisfied, "{}", report.summary());
        let json = serde_json::to_value(&report).unwrap();
        for key in ["theorem", "lhs", "rhs", "constants_used", "satisfied", "slack"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["theorem"], "T3");
    }

    #[test]
    fn power_law_slope_recovered() {
        let hs = [8usize, 16, 32, 64, 128, 256, 512];
        let ms: Vec<f64> = hs.iter().map(|&t| 3.7 * (t as f64).powf(-2.0 / 3.0)).collect();
        let fit = fit_power_law(&hs, &ms).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-9);
        assert!((fit.intercept - 3.7_f64.ln()).abs() < 1e-9);
        assert!(!fit.low_confidence);

        let flat = fit_power_law(&hs, &[0.2; 7]).unwrap();
        assert!(flat.slope.abs() < 1e-12);

        let short = fit_power_law(&[8, 16], &[1.0, 0.5]).unwrap();
        assert!(short.low_confidence);
        assert!(fit_power_law(&[16, 8], &[1.0, 0.5]).is_err());
        assert!(fit_power_law(&[8, 16], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn rate_fit_needs_four_horizons() {
        let p = quad();
        let cfg = RateConfig {
            algorithm: Algorithm::Smg { beta: 0.5 },
            gamma: 0.01,
            strategy: crate::ShufflingKind::Incremental,
            seeds: vec![0],
            w0: vec![1.0; 3],
        };
        assert!(fit_rate(&p, &cfg, &[8, 16, 32]).is_err());
        let fit = fit_rate(&p, &cfg, &[2, 4, 8, 16]).unwrap();
        assert!(fit.slope.is_finite());
    }

    #[test]
    fn rate_fit_aborts_on_divergence() {
        let p = quad();
        let cfg = RateConfig {
            algorithm: Algorithm::Sgd,
            gamma: 1e6,
            strategy: crate::ShufflingKind::Incremental,
            seeds: vec![0],
            w0: vec![1.0; 3],
        };
        assert!(fit_rate(&p, &cfg, &[100, 200, 400, 800]).is_err());
    }

    #[test]
    fn identities_on_one_dimensional_instance() {
        let p = QuadraticMeanProblem::isotropic(vec![vec![2.0]], 1.0).unwrap();
        let report = identity_suite(&p, 0.5, 2, ShufflingStrategy::incremental(), &[0.0]).unwrap();
        assert_eq!(report.checks.len(), 5);
        for c in &report.checks {
            assert!(c.max_deviation <= 1e-12, "{c:?}");
        }
    }

    #[test]
    fn identities_on_random_instances() {
        for (seed, beta) in [(1u64, 0.0), (2, 0.3), (3, 0.9)] {
            let p = QuadraticMeanProblem::random(8, 3, seed).unwrap();
            for strategy in [
                ShufflingStrategy::incremental(),
                ShufflingStrategy::shuffle_once(seed),
                ShufflingStrategy::random_reshuffling(seed),
            ] {
                let report = identity_suite(&p, beta, 8, strategy, &[1.0, 0.5, -2.0]).unwrap();
                assert!(report.all_passed(), "{report:?}");
            }
        }
    }

    #[test]
    fn cosine_sum_two_epochs() {
        assert!(cosine_sum_deviation(2) < 1e-15);
        let s = Schedule::cosine(1.0, 2).unwrap();
        let total: f64 = s.etas().iter().sum::<f64>() * 2f64.cbrt();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
