//! Per-epoch permutations and the weighted choice of the output iterate.
//!
//! Permutations are 0-based index arrays. Randomness comes from ChaCha8
//! seeded with the strategy seed; epoch `t` of randomized reshuffling draws
//! from ChaCha stream `t`, so any epoch can be regenerated without replaying
//! earlier ones. Shuffle-once uses stream 0 and the output-iterate draw uses
//! [`OUTPUT_STREAM`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ChaCha stream reserved for sampling the output iterate.
pub const OUTPUT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShufflingKind {
    /// Fresh uniform permutation every epoch.
    RandomReshuffling,
    /// One seeded uniform permutation reused every epoch.
    ShuffleOnce,
    /// Identity permutation every epoch.
    Incremental,
}

impl ShufflingKind {
    pub fn is_deterministic_across_epochs(self) -> bool {
        !matches!(self, ShufflingKind::RandomReshuffling)
    }
}

impl std::str::FromStr for ShufflingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rr" | "random_reshuffling" => Ok(ShufflingKind::RandomReshuffling),
            "once" | "shuffle_once" | "single" => Ok(ShufflingKind::ShuffleOnce),
            "inc" | "incremental" => Ok(ShufflingKind::Incremental),
            other => Err(Error::invalid(format!("unknown shuffling strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShufflingStrategy {
    pub kind: ShufflingKind,
    pub seed: u64,
}

impl ShufflingStrategy {
    pub fn new(kind: ShufflingKind, seed: u64) -> Self {
        ShufflingStrategy { kind, seed }
    }

    pub fn incremental() -> Self {
        Self::new(ShufflingKind::Incremental, 0)
    }

    pub fn random_reshuffling(seed: u64) -> Self {
        Self::new(ShufflingKind::RandomReshuffling, seed)
    }

    pub fn shuffle_once(seed: u64) -> Self {
        Self::new(ShufflingKind::ShuffleOnce, seed)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// In-place Fisher–Yates shuffle of `0..n`.
fn fisher_yates(perm: &mut [usize], rng: &mut impl Rng) {
    for (k, p) in perm.iter_mut().enumerate() {
        *p = k;
    }
    for i in (1..perm.len()).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
}

/// Permutation used in epoch `t` (1-based) over `n` components.
pub fn permutation_for_epoch(strategy: ShufflingStrategy, n: usize, t: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("permutation length must be at least 1"));
    }
    if t == 0 {
        return Err(Error::invalid("epochs are numbered from 1"));
    }
    let mut perm = vec![0; n];
    fill_permutation(strategy, t, &mut perm);
    Ok(perm)
}

fn fill_permutation(strategy: ShufflingStrategy, t: usize, perm: &mut [usize]) {
    match strategy.kind {
        ShufflingKind::Incremental => {
            for (k, p) in perm.iter_mut().enumerate() {
                *p = k;
            }
        }
        ShufflingKind::ShuffleOnce => fisher_yates(perm, &mut stream_rng(strategy.seed, 0)),
        ShufflingKind::RandomReshuffling => fisher_yates(perm, &mut stream_rng(strategy.seed, t as u64)),
    }
}

/// Permutations for one run, reusing a single buffer.
#[derive(Debug, Clone)]
pub struct PermutationStream {
    strategy: ShufflingStrategy,
    perm: Vec<usize>,
    fixed: bool,
}

impl PermutationStream {
    pub fn new(strategy: ShufflingStrategy, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("permutation length must be at least 1"));
        }
        let mut perm = vec![0; n];
        let fixed = strategy.kind.is_deterministic_across_epochs();
        if fixed {
            fill_permutation(strategy, 1, &mut perm);
        }
        Ok(PermutationStream { strategy, perm, fixed })
    }

    pub fn strategy(&self) -> ShufflingStrategy {
        self.strategy
    }

    pub fn next_epoch_permutation(&mut self, t: usize) -> &[usize] {
        if !self.fixed {
            fill_permutation(self.strategy, t, &mut self.perm);
        }
        &self.perm
    }
}

/// Normalized selection probabilities `η_t / Σ η_t`.
///
/// Zero weights are allowed (a cosine schedule ends at `η_T = 0`); negative
/// or non-finite weights and an all-zero vector are rejected.
pub fn output_probabilities(etas: &[f64]) -> Result<Vec<f64>> {
    if etas.is_empty() {
        return Err(Error::invalid("no learning rates to weight"));
    }
    if let Some(bad) = etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::invalid(format!("learning rates must be finite and nonnegative, got {bad}")));
    }
    let total: f64 = etas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("learning rates sum to zero"));
    }
    Ok(etas.iter().map(|e| e / total).collect())
}

/// Samples `t − 1 ∈ {0, …, T−1}` with probability proportional to `η_t`.
pub fn select_output_index(etas: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let probs = output_probabilities(etas)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = k;
            cum += p;
            if u < cum {
                return Ok(k);
            }
        }
    }
    Ok(last_positive)
}

/// Picks `ŵ_T` among `w̃₀ … w̃_{T−1}` using [`select_output_index`].
pub fn select_output_iterate<'a>(
    iterates: &'a [Vec<f64>],
    etas: &[f64],
    rng: &mut impl Rng,
) -> Result<(usize, &'a [f64])> {
    if iterates.len() != etas.len() {
        return Err(Error::DimensionMismatch { expected: etas.len(), got: iterates.len() });
    }
    let k = select_output_index(etas, rng)?;
    Ok((k, &iterates[k]))
}

/// RNG used for output selection of a run seeded with `seed`.
pub fn output_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, OUTPUT_STREAM)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_bijection(p: &[usize]) -> bool {
        let mut s = p.to_vec();
        s.sort_unstable();
        s.iter().enumerate().all(|(k, &v)| k == v)
    }

    #[test]
    fn incremental_is_identity() {
        for t in [1, 2, 9] {
            assert_eq!(permutation_for_epoch(ShufflingStrategy::incremental(), 4, t).unwrap(), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn shuffle_once_reuses_permutation() {
        let s = ShufflingStrategy::shuffle_once(99);
        let p1 = permutation_for_epoch(s, 20, 1).unwrap();
        assert_eq!(p1, permutation_for_epoch(s, 20, 7).unwrap());
        assert!(is_bijection(&p1));
        let mut stream = PermutationStream::new(s, 20).unwrap();
        assert_eq!(stream.next_epoch_permutation(3), &p1[..]);
    }

    #[test]
    fn reshuffling_is_reproducible_out_of_order() {
        let s = ShufflingStrategy::random_reshuffling(5);
        let mut stream = PermutationStream::new(s, 30).unwrap();
        let seq: Vec<Vec<usize>> = (1..=5).map(|t| stream.next_epoch_permutation(t).to_vec()).collect();
        assert_eq!(permutation_for_epoch(s, 30, 4).unwrap(), seq[3]);
        assert_ne!(seq[0], seq[1]);
        assert!(seq.iter().all(|p| is_bijection(p)));
    }

    #[test]
    fn zero_length_rejected() {
        assert!(permutation_for_epoch(ShufflingStrategy::incremental(), 0, 1).is_err());
        assert!(PermutationStream::new(ShufflingStrategy::incremental(), 0).is_err());
    }

    /// Upper 0.001 quantile of χ² via the Wilson–Hilferty approximation.
    fn chi_square_critical_0001(df: f64) -> f64 {
        let z = 3.090_232_306;
        let a = 2.0 / (9.0 * df);
        df * (1.0 - a + z * a.sqrt()).powi(3)
    }

    #[test]
    fn reshuffling_positions_are_uniform() {
        let n = 52;
        let draws = 10_000;
        let s = ShufflingStrategy::random_reshuffling(2024);
        let mut counts = vec![vec![0u32; n]; n];
        let mut stream = PermutationStream::new(s, n).unwrap();
        for t in 1..=draws {
            for (pos, &v) in stream.next_epoch_permutation(t).iter().enumerate() {
                counts[pos][v] += 1;
            }
        }
        let expected = draws as f64 / n as f64;
        let crit = chi_square_critical_0001((n - 1) as f64);
        for (pos, row) in counts.iter().enumerate() {
            let chi: f64 = row.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi < crit, "position {pos}: chi2 {chi} >= {crit}");
        }
    }

    #[test]
    fn selection_probabilities() {
        assert_eq!(output_probabilities(&[2.0; 4]).unwrap(), vec![0.25; 4]);
        let p = output_probabilities(&[1.0, 2.0, 3.0]).unwrap();
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-16 && (p[1] - 1.0 / 3.0).abs() < 1e-16 && (p[2] - 0.5).abs() < 1e-16);
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn selection_rejects_bad_weights() {
        let mut rng = output_rng(0);
        assert!(select_output_index(&[], &mut rng).is_err());
        assert!(select_output_index(&[1.0, -1.0], &mut rng).is_err());
        assert!(select_output_index(&[0.0, 0.0], &mut rng).is_err());
        assert!(select_output_index(&[1.0, f64::NAN], &mut rng).is_err());
        let its = vec![vec![0.0]; 2];
        assert!(select_output_iterate(&its, &[1.0], &mut rng).is_err());
    }

    #[test]
    fn zero_weight_never_selected() {
        let mut rng = output_rng(3);
        for _ in 0..10_000 {
            assert_ne!(select_output_index(&[1.0, 1.0, 0.0], &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn selection_frequencies_match_weights() {
        let mut rng = output_rng(17);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        let its = vec![vec![0.0], vec![1.0], vec![2.0]];
        for _ in 0..draws {
            let (k, w) = select_output_iterate(&its, &[1.0, 2.0, 3.0], &mut rng).unwrap();
            assert_eq!(w[0], k as f64);
            counts[k] += 1;
        }
        for (c, p) in counts.iter().zip([1.0 / 6.0, 1.0 / 3.0, 0.5]) {
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "count {c} for p {p}");
        }
    }

    #[test]
    fn selection_is_seed_deterministic() {
        let etas = [0.3, 0.2, 0.1, 0.4];
        let a: Vec<usize> = {
            let mut r = output_rng(8);
            (0..50).map(|_| select_output_index(&etas, &mut r).unwrap()).collect()
        };
        let b: Vec<usize> = {
            let mut r = output_rng(8);
            (0..50).map(|_| select_output_index(&etas, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
