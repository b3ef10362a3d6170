use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{resolve_data_path, ExperimentConfig};
use crate::audit::{
    audit_theorem1, audit_theorem2, audit_theorem3, fit_power_law, horizon_metrics, identity_suite, BoundReport,
    IdentityReport, RateConfig, RateFit, Theorem,
};
use crate::dataio::{load_libsvm, write_json, write_trace, DatasetMeta};
use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, RunRecord};
use crate::problems::Problem;
use crate::schedules::Schedule;
use crate::shuffling::{ShufflingKind, ShufflingStrategy};

pub(crate) fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config_hash: String,
    pub records: Vec<RunRecord>,
    pub traces: Vec<PathBuf>,
    pub report: Option<BoundReport>,
}

/// Problem, schedule, one record per repeat, and the config hash.
pub type Execution = (Box<dyn Problem>, Schedule, Vec<RunRecord>, String);

/// Runs all repeats of `cfg`. Repeats share the initial point and differ in
/// their permutation seed.
pub fn execute(cfg: &ExperimentConfig) -> Result<Execution> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let problem = cfg.build_problem()?;
    let (schedule, _, _) = cfg.build_schedule(problem.as_ref())?;
    let w0 = cfg.initial_point(problem.dim());
    let records = cfg
        .seeds()
        .into_iter()
        .map(|seed| {
            let mut rec =
                cfg.algorithm.run(problem.as_ref(), &schedule, ShufflingStrategy::new(cfg.strategy, seed), &w0)?;
            rec.config_hash = Some(hash.clone());
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((problem, schedule, records, hash))
}

/// Audits finished runs against the bound matching their algorithm and strategy:
/// SMG with fixed permutations per run, SMG under reshuffling averaged over runs,
/// single-shuffle momentum per run. The least favourable report is returned.
pub fn audit_records(cfg: &ExperimentConfig, problem: &dyn Problem, records: &[RunRecord]) -> Result<BoundReport> {
    let (c, n) = (problem.constants(), problem.n());
    let worst = |reports: Vec<BoundReport>| {
        reports.into_iter().min_by(|a, b| a.slack.total_cmp(&b.slack)).ok_or_else(|| Error::invalid("no runs"))
    };
    match (cfg.algorithm, cfg.strategy) {
        (Algorithm::Smg { beta }, ShufflingKind::RandomReshuffling) => audit_theorem2(records, c, beta, n),
        (Algorithm::Smg { beta }, _) => {
            worst(records.iter().map(|r| audit_theorem1(r, c, beta, n)).collect::<Result<_>>()?)
        }
        (Algorithm::Sgd, ShufflingKind::RandomReshuffling) => audit_theorem2(records, c, 0.0, n),
        (Algorithm::Sgd, _) => worst(records.iter().map(|r| audit_theorem1(r, c, 0.0, n)).collect::<Result<_>>()?),
        (Algorithm::Ssmg { beta }, _) => {
            worst(records.iter().map(|r| audit_theorem3(r, c, beta, n)).collect::<Result<_>>()?)
        }
        (other, _) => Err(Error::PremisesUnmet(format!("no convergence bound covers {}", other.name()))),
    }
}

/// Executes `cfg`, writes one trace per repeat to `out_dir`, and prints the final
/// loss and weighted gradient-norm average of each. With `audit`, attaches a
/// [`BoundReport`] to every sidecar and writes `audit.json`.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, audit: bool, out: &mut dyn Write) -> Result<RunOutcome> {
    let (problem, schedule, records, hash) = execute(cfg)?;
    ensure_dir(out_dir)?;
    let report = if audit { Some(audit_records(cfg, problem.as_ref(), &records)?) } else { None };
    let config_value = serde_json::to_value(cfg)?;
    let mut traces = Vec::new();
    say(out, format!("config {hash}  eta_1 = {}", schedule.initial_eta()))?;
    for rec in &records {
        let path = out_dir.join(format!("trace_seed{}.csv", rec.seed));
        write_trace(rec, &path, Some(config_value.clone()), report.as_ref())?;
        say(
            out,
            format!(
                "seed {:>4}  final_loss {:.10e}  weighted_grad_norm_sq {:.10e}",
                rec.seed,
                rec.final_loss,
                rec.weighted_grad_norm_sq()
            ),
        )?;
        traces.push(path);
    }
    if let Some(r) = &report {
        write_json(&out_dir.join("audit.json"), r)?;
        say(out, r.summary())?;
    }
    Ok(RunOutcome { config_hash: hash, records, traces, report })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditOutcome {
    pub config_hash: String,
    pub report: BoundReport,
    pub identities: Option<IdentityReport>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.report.satisfied && self.identities.as_ref().is_none_or(IdentityReport::all_passed)
    }
}

/// Runs `cfg`, audits it, optionally runs the identity suite (over at most
/// `identity_horizon` epochs), and writes `audit.json`.
pub fn cmd_audit(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    identities: bool,
    identity_horizon: usize,
    out: &mut dyn Write,
) -> Result<AuditOutcome> {
    let (problem, _, records, hash) = execute(cfg)?;
    let report = audit_records(cfg, problem.as_ref(), &records)?;
    say(out, report.summary())?;
    let identities = if identities {
        let beta = match cfg.algorithm {
            Algorithm::Smg { beta } | Algorithm::Ssmg { beta } => beta,
            _ => 0.0,
        };
        let w0 = cfg.initial_point(problem.dim());
        let strategy = ShufflingStrategy::new(cfg.strategy, cfg.seed);
        let rep = identity_suite(problem.as_ref(), beta, identity_horizon.min(cfg.horizon).max(2), strategy, &w0)?;
        for c in &rep.checks {
            say(
                out,
                format!(
                    "{} {}: max deviation {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_deviation
                ),
            )?;
        }
        Some(rep)
    } else {
        None
    };
    ensure_dir(out_dir)?;
    let outcome = AuditOutcome { config_hash: hash, report, identities };
    write_json(&out_dir.join("audit.json"), &outcome)?;
    Ok(outcome)
}

pub const DEFAULT_HORIZONS: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

/// Fits the log-log slope of the per-horizon median metric (constant rate
/// `γ/T^{1/3}`, seeds from `cfg`). Writes `rate.csv`, `rate.json` and `rate.gp`.
/// Fewer than four horizons give a fit flagged as low confidence.
pub fn cmd_rate(cfg: &ExperimentConfig, horizons: &[usize], out_dir: &Path, out: &mut dyn Write) -> Result<RateFit> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let mut gamma = cfg.schedule.gamma;
    if cfg.schedule.rr_scaling {
        gamma *= (problem.n() as f64).cbrt();
    }
    let first = *horizons.first().ok_or_else(|| Error::invalid("no horizons"))?;
    if cfg.enforce_cap {
        if let Some(cap) = super::config::step_cap(&cfg.algorithm, cfg.strategy, problem.constants(), problem.n())? {
            // the smallest horizon has the largest rate γ/T^{1/3}
            gamma = gamma.min(cap.max_eta * (first as f64).cbrt());
        }
    }
    let rc = RateConfig {
        algorithm: cfg.algorithm,
        gamma,
        strategy: cfg.strategy,
        seeds: cfg.seeds(),
        w0: cfg.initial_point(problem.dim()),
    };
    let metrics = horizon_metrics(problem.as_ref(), &rc, horizons)?;
    let fit = fit_power_law(horizons, &metrics)?;

    ensure_dir(out_dir)?;
    let mut csv = String::from("T,metric\n");
    for (t, m) in horizons.iter().zip(&metrics) {
        writeln!(csv, "{t},{m}").expect("write to String");
    }
    write_text(&out_dir.join("rate.csv"), &csv)?;
    write_json(&out_dir.join("rate.json"), &fit)?;
    write_text(&out_dir.join("rate.gp"), &rate_plot_script(&fit))?;
    say(
        out,
        format!(
            "slope {:.4} intercept {:.4} over {} horizons{}",
            fit.slope,
            fit.intercept,
            horizons.len(),
            if fit.low_confidence { " (low confidence: fewer than 4 points)" } else { "" }
        ),
    )?;
    Ok(fit)
}

fn rate_plot_script(fit: &RateFit) -> String {
    format!(
        "set datafile separator ','\nset logscale xy\nset xlabel 'T'\nset ylabel 'weighted mean |grad F|^2'\n\
         set key top right\nplot 'rate.csv' skip 1 using 1:2 with linespoints title 'median over seeds', \\\n     \
         exp({}) * x**({}) title 'fit, slope {:.3}', \\\n     exp({}) * x**(-2.0/3.0) dashtype 2 title 'T^(-2/3)'\n",
        fit.intercept, fit.slope, fit.slope, fit.intercept
    )
}

/// One method in a comparison, with its own base rate.
#[derive(Debug, Clone, Copy)]
pub struct CompareEntry {
    pub label: &'static str,
    pub algorithm: Algorithm,
    pub gamma: f64,
}

/// Per-iterate loss curves for several methods over shared seeds and a shared
/// initial point. Every method reshuffles except single-shuffle momentum, which
/// uses the shuffle-once permutation of the same seed. Row `k` holds the loss at
/// the start of epoch `k + 1` (row `T` is the final iterate).
#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    /// `[method][iterate]` mean over seeds.
    pub loss_mean: Vec<Vec<f64>>,
    pub loss_std: Vec<Vec<f64>>,
    pub grad_norm_sq_mean: Vec<Vec<f64>>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn compare(cfg: &ExperimentConfig, entries: &[CompareEntry]) -> Result<Comparison> {
    let problem = cfg.build_problem()?;
    let w0 = cfg.initial_point(problem.dim());
    let seeds = cfg.seeds();
    let mut cmp = Comparison { labels: vec![], loss_mean: vec![], loss_std: vec![], grad_norm_sq_mean: vec![] };
    for e in entries {
        let mut c = cfg.clone();
        c.algorithm = e.algorithm;
        c.schedule.gamma = e.gamma;
        c.strategy = match e.algorithm {
            Algorithm::Ssmg { .. } => ShufflingKind::ShuffleOnce,
            _ => ShufflingKind::RandomReshuffling,
        };
        c.validate()?;
        let (schedule, _, _) = c.build_schedule(problem.as_ref())?;
        let runs = seeds
            .iter()
            .map(|&s| e.algorithm.run(problem.as_ref(), &schedule, ShufflingStrategy::new(c.strategy, s), &w0))
            .collect::<Result<Vec<_>>>()?;
        let horizon = cfg.horizon;
        let (mut lm, mut ls, mut gm) = (vec![], vec![], vec![]);
        for k in 0..=horizon {
            let loss: Vec<f64> =
                runs.iter().map(|r| if k < horizon { r.rows[k].loss } else { r.final_loss }).collect();
            let grad: Vec<f64> =
                runs.iter().map(|r| if k < horizon { r.rows[k].grad_norm_sq } else { r.final_grad_norm_sq }).collect();
            let (m, s) = mean_std(&loss);
            lm.push(m);
            ls.push(s);
            gm.push(mean_std(&grad).0);
        }
        cmp.labels.push(e.label.to_string());
        cmp.loss_mean.push(lm);
        cmp.loss_std.push(ls);
        cmp.grad_norm_sq_mean.push(gm);
    }
    Ok(cmp)
}

/// Writes `compare.csv` (loss mean/std and gradient-norm mean per method per
/// iterate) and `compare.gp`.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    entries: &[CompareEntry],
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<Comparison> {
    let cmp = compare(cfg, entries)?;
    ensure_dir(out_dir)?;
    let mut csv = String::from("epoch");
    for l in &cmp.labels {
        write!(csv, ",{l}_loss_mean,{l}_loss_std,{l}_grad_norm_sq_mean").expect("write to String");
    }
    csv.push('\n');
    for k in 0..=cfg.horizon {
        write!(csv, "{k}").expect("write to String");
        for m in 0..cmp.labels.len() {
            write!(csv, ",{},{},{}", cmp.loss_mean[m][k], cmp.loss_std[m][k], cmp.grad_norm_sq_mean[m][k])
                .expect("write to String");
        }
        csv.push('\n');
    }
    write_text(&out_dir.join("compare.csv"), &csv)?;

    let mut gp = String::from(
        "set datafile separator ','\nset logscale y\nset xlabel 'epoch'\nset ylabel 'train loss'\nplot \\\n",
    );
    let curves: Vec<String> = cmp
        .labels
        .iter()
        .enumerate()
        .map(|(m, l)| format!("  'compare.csv' skip 1 using 1:{} with lines title '{l}'", 2 + 3 * m))
        .collect();
    gp.push_str(&curves.join(", \\\n"));
    gp.push('\n');
    write_text(&out_dir.join("compare.gp"), &gp)?;
    for (m, l) in cmp.labels.iter().enumerate() {
        let last = cmp.loss_mean[m][cfg.horizon];
        say(out, format!("{l:>6}  final loss {last:.6e} ± {:.2e}", cmp.loss_std[m][cfg.horizon]))?;
    }
    Ok(cmp)
}

/// Parses a LIBSVM file and prints its metadata as JSON.
pub fn cmd_parse(path: &Path, out: &mut dyn Write) -> Result<DatasetMeta> {
    let (_, meta) = load_libsvm(&resolve_data_path(path))?;
    say(out, serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

/// Theorem a config would be audited against, if any.
pub fn applicable_theorem(cfg: &ExperimentConfig) -> Option<Theorem> {
    match (cfg.algorithm, cfg.strategy) {
        (Algorithm::Smg { .. } | Algorithm::Sgd, ShufflingKind::RandomReshuffling) => Some(Theorem::T2),
        (Algorithm::Smg { .. } | Algorithm::Sgd, _) => Some(Theorem::T1),
        (Algorithm::Ssmg { .. }, _) => Some(Theorem::T3),
        _ => None,
    }
}
