use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{load_libsvm, scale_features, synth_binary_dataset};
use crate::error::{Error, Result};
use crate::optimizers::{initial_point, Algorithm};
use crate::problems::{LogisticProblem, Problem, ProblemConstants, QuadraticMeanProblem};
use crate::schedules::{cap_general, cap_rr, cap_smoothness, Schedule, ScheduleKind, StepCap};
use crate::shuffling::ShufflingKind;

/// Environment variable naming the dataset root for relative `--data` paths.
pub const DATA_DIR_ENV: &str = "SMG_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Regularized logistic regression on [`synth_binary_dataset`] data.
    Synthetic { n: usize, d: usize, seed: u64, separability: f64, reg_lambda: f64 },
    /// Regularized logistic regression on a LIBSVM file.
    Libsvm { path: PathBuf, reg_lambda: f64, scale_features: bool },
    /// [`QuadraticMeanProblem::random`].
    Quadratic { n: usize, d: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub shape: ScheduleKind,
    pub gamma: f64,
    /// Multiply `γ` by `n^{1/3}`.
    pub rr_scaling: bool,
}

/// Everything that determines a batch of runs. Its canonical JSON hash stamps
/// every output, and the sidecar copy is enough to re-execute the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
    pub strategy: ShufflingKind,
    pub horizon: usize,
    /// Repeat `r` uses permutation seed `seed + r`; the initial point uses `seed`.
    pub seed: u64,
    pub repeats: usize,
    pub enforce_cap: bool,
    /// Standard deviation of the Gaussian initial point.
    pub w0_scale: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if self.horizon == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if !(self.w0_scale >= 0.0 && self.w0_scale.is_finite()) {
            return Err(Error::invalid("w0 scale must be finite and nonnegative"));
        }
        if matches!(self.algorithm, Algorithm::Ssmg { .. }) && self.strategy == ShufflingKind::RandomReshuffling {
            return Err(Error::invalid("ssmg needs a fixed permutation: use --strategy once or inc"));
        }
        Ok(())
    }

    /// sha256 of the config serialized with sorted keys.
    pub fn hash(&self) -> Result<String> {
        canonical_hash(&serde_json::to_value(self)?)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    pub fn build_problem(&self) -> Result<Box<dyn Problem>> {
        Ok(match &self.problem {
            ProblemSpec::Synthetic { n, d, seed, separability, reg_lambda } => {
                let data = synth_binary_dataset(*n, *d, *seed, *separability)?;
                Box::new(LogisticProblem::new(data, Some(*d), *reg_lambda)?)
            }
            ProblemSpec::Libsvm { path, reg_lambda, scale_features: scale } => {
                let (mut data, meta) = load_libsvm(&resolve_data_path(path))?;
                if *scale {
                    data = scale_features(&data, meta.d)?;
                }
                Box::new(LogisticProblem::new(data, Some(meta.d), *reg_lambda)?)
            }
            ProblemSpec::Quadratic { n, d, seed } => Box::new(QuadraticMeanProblem::random(*n, *d, *seed)?),
        })
    }

    /// Builds the schedule for `n` components. With `enforce_cap`, `γ` is scaled
    /// down to the cap of [`step_cap`]; the returned flag says whether it was.
    pub fn build_schedule(&self, problem: &dyn Problem) -> Result<(Schedule, Option<StepCap>, bool)> {
        let mut schedule = Schedule::new(self.schedule.shape.clone(), self.schedule.gamma, self.horizon)?;
        if self.schedule.rr_scaling {
            schedule = schedule.with_rr_scaling(problem.n());
        }
        let cap = step_cap(&self.algorithm, self.strategy, problem.constants(), problem.n())?;
        let clamped = match (&cap, self.enforce_cap) {
            (Some(c), true) => schedule.clamp_to(c.max_eta),
            _ => false,
        };
        Ok((schedule, cap, clamped))
    }

    pub fn initial_point(&self, dim: usize) -> Vec<f64> {
        initial_point(dim, self.seed, self.w0_scale)
    }
}

/// Step-size cap that the matching convergence bound requires, if any:
/// `1/(L√K)` for SMG (and SGD as `β = 0`), `1/(L√D)` for SMG under reshuffling,
/// `1/L` for single-shuffle momentum. Heavy-ball and Adam have none.
pub fn step_cap(
    algorithm: &Algorithm,
    strategy: ShufflingKind,
    c: &ProblemConstants,
    n: usize,
) -> Result<Option<StepCap>> {
    let rr = strategy == ShufflingKind::RandomReshuffling;
    Ok(match *algorithm {
        Algorithm::Smg { beta } if rr => Some(cap_rr(beta, c.theta, n, c.smoothness)?),
        Algorithm::Smg { beta } => Some(cap_general(beta, c.theta, c.smoothness)?),
        Algorithm::Sgd if rr => Some(cap_rr(0.0, c.theta, n, c.smoothness)?),
        Algorithm::Sgd => Some(cap_general(0.0, c.theta, c.smoothness)?),
        Algorithm::Ssmg { .. } => Some(cap_smoothness(c.smoothness)?),
        Algorithm::Sgdm { .. } | Algorithm::Adam { .. } => None,
    })
}

/// Relative paths that do not exist are looked up under `$SMG_DATA_DIR`.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(root) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&root).join(path);
        }
    }
    path.to_path_buf()
}

/// sha256 hex of `value` rendered with object keys sorted.
pub fn canonical_hash(value: &serde_json::Value) -> Result<String> {
    // serde_json's default map is ordered by key
    let text = serde_json::to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Loads a config from a JSON file holding either the config itself or a trace
/// sidecar with a `config` field.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("config").map(serde_json::Value::take) {
        value = inner;
    }
    let cfg: ExperimentConfig = serde_json::from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSpec::Synthetic { n: 32, d: 5, seed: 7, separability: 0.9, reg_lambda: 0.01 },
            algorithm: Algorithm::Smg { beta: 0.5 },
            schedule: ScheduleSpec { shape: ScheduleKind::Constant, gamma: 0.1, rr_scaling: false },
            strategy: ShufflingKind::RandomReshuffling,
            horizon: 10,
            seed: 0,
            repeats: 1,
            enforce_cap: false,
            w0_scale: 0.01,
        }
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = r#"{"x": 1, "y": {"b": 2.5, "a": [1, 2]}}"#;
        let b = r#"{"y": {"a": [1, 2], "b": 2.5}, "x": 1}"#;
        let ha = canonical_hash(&serde_json::from_str(a).unwrap()).unwrap();
        let hb = canonical_hash(&serde_json::from_str(b).unwrap()).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(ha.len(), 64);

        let cfg = sample();
        let mut v = serde_json::to_value(&cfg).unwrap();
        let obj = v.as_object_mut().unwrap();
        let reordered: serde_json::Map<_, _> = obj.clone().into_iter().rev().collect();
        let back: ExperimentConfig = serde_json::from_value(serde_json::Value::Object(reordered)).unwrap();
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = serde_json::to_value(sample()).unwrap();
        v["algorithm"]["gamma"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = serde_json::to_value(sample()).unwrap();
        v["problem"]["extra"] = serde_json::json!(true);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn enforce_cap_clamps_gamma() {
        let mut cfg = sample();
        cfg.schedule.gamma = 100.0;
        cfg.enforce_cap = true;
        let p = cfg.build_problem().unwrap();
        let (s, cap, clamped) = cfg.build_schedule(p.as_ref()).unwrap();
        assert!(clamped);
        let cap = cap.unwrap();
        assert!(s.initial_eta() <= cap.max_eta * (1.0 + 1e-12));
        assert_eq!(cap.kind, crate::schedules::CapKind::Reshuffling);
    }

    #[test]
    fn caps_per_algorithm() {
        let c = ProblemConstants { smoothness: 1.0, grad_bound: None, theta: 0.0, sigma_sq: 1.0, f_lower: 0.0 };
        let inc = ShufflingKind::Incremental;
        assert_eq!(step_cap(&Algorithm::Sgd, inc, &c, 4).unwrap().unwrap().constant, 45.0);
        assert_eq!(step_cap(&Algorithm::Ssmg { beta: 0.3 }, inc, &c, 4).unwrap().unwrap().max_eta, 1.0);
        assert!(step_cap(&Algorithm::adam_default(), inc, &c, 4).unwrap().is_none());
    }
}
