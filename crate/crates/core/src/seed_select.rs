//! Choosing a starting Sobol' dimension by short trial trainings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mt19937::Mt19937;
use crate::sobol::MAX_DIMENSION;

#[derive(Debug, Error)]
pub enum SeedSearchError<E> {
    #[error("invalid seed search settings: {0}")]
    InvalidConfig(String),
    #[error("cannot draw {candidates} distinct seeds from [{min_seed}, {max_seed}]")]
    EmptyRange {
        min_seed: usize,
        max_seed: usize,
        candidates: usize,
    },
    #[error("trial for seed {seed} failed: {source}")]
    TrainingFailure {
        seed: usize,
        #[source]
        source: E,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSearchConfig {
    /// Smallest candidate seed (W).
    pub min_seed: usize,
    /// Largest candidate seed (Z).
    pub max_seed: usize,
    /// Number of distinct candidates (X).
    pub candidates: usize,
    /// Epochs per trial training (Y).
    pub trial_epochs: usize,
    /// Trainings per candidate (R).
    pub repeats: usize,
    /// Continue training the winning trial model instead of starting fresh.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for SeedSearchConfig {
    fn default() -> Self {
        Self {
            min_seed: 1,
            max_seed: 10,
            candidates: 5,
            trial_epochs: 1,
            repeats: 1,
            warm_start: false,
        }
    }
}

impl SeedSearchConfig {
    pub fn validate<E>(&self) -> Result<(), SeedSearchError<E>> {
        let invalid = |msg: String| Err(SeedSearchError::InvalidConfig(msg));
        if self.min_seed < 1 || self.max_seed > MAX_DIMENSION || self.min_seed > self.max_seed {
            return invalid(format!(
                "need 1 <= W <= Z <= {MAX_DIMENSION}, got W={}, Z={}",
                self.min_seed, self.max_seed
            ));
        }
        if self.trial_epochs < 1 || self.repeats < 1 || self.candidates < 1 {
            return invalid("X, Y and R must all be at least 1".to_string());
        }
        if self.candidates > self.max_seed - self.min_seed + 1 {
            return Err(SeedSearchError::EmptyRange {
                min_seed: self.min_seed,
                max_seed: self.max_seed,
                candidates: self.candidates,
            });
        }
        Ok(())
    }

    /// Extra epochs charged for the search: `Y * (X * R - 1)`.
    pub fn delta_q(&self) -> usize {
        self.trial_epochs * (self.candidates * self.repeats - 1)
    }
}

/// `X` distinct seeds from `[W, Z]`, sorted ascending, drawn from a dedicated
/// MT19937 stream seeded with `trial_rng_seed`.
pub fn sample_candidates<E>(cfg: &SeedSearchConfig, trial_rng_seed: u32) -> Result<Vec<usize>, SeedSearchError<E>> {
    cfg.validate()?;
    let mut rng = Mt19937::new(trial_rng_seed);
    let mut pool: Vec<usize> = (cfg.min_seed..=cfg.max_seed).collect();
    // Partial Fisher–Yates: the first X slots become a uniform sample without replacement.
    for i in 0..cfg.candidates {
        let j = i + rng.next_below((pool.len() - i) as u32) as usize;
        pool.swap(i, j);
    }
    pool.truncate(cfg.candidates);
    pool.sort_unstable();
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub seed: usize,
    pub repeat: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSearchOutcome {
    pub nu: usize,
    pub best_metric: f64,
    pub delta_q: usize,
    pub candidates: Vec<usize>,
    pub trials: Vec<Trial>,
}

/// Best trial under "strictly greater wins", scanning in ascending seed order.
/// The result does not depend on the order of `trials`.
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    let mut best: Option<&Trial> = None;
    for t in trials {
        best = match best {
            None => Some(t),
            Some(b) if t.metric > b.metric || (t.metric == b.metric && (t.seed, t.repeat) < (b.seed, b.repeat)) => {
                Some(t)
            }
            keep => keep,
        };
    }
    best
}

/// Runs `trial(seed, repeat)` for every candidate and repeat, each returning
/// the maximized metric, and picks the starting seed.
pub fn select_seed<E, F>(
    cfg: &SeedSearchConfig,
    trial_rng_seed: u32,
    mut trial: F,
) -> Result<SeedSearchOutcome, SeedSearchError<E>>
where
    F: FnMut(usize, usize) -> Result<f64, E>,
{
    let candidates = sample_candidates(cfg, trial_rng_seed)?;
    let mut trials = Vec::with_capacity(candidates.len() * cfg.repeats);
    for &seed in &candidates {
        for repeat in 0..cfg.repeats {
            let metric = trial(seed, repeat).map_err(|source| SeedSearchError::TrainingFailure { seed, source })?;
            trials.push(Trial { seed, repeat, metric });
        }
    }
    finish(cfg, candidates, trials)
}

/// Assembles the outcome from trials that were run elsewhere, e.g. in parallel.
pub fn finish<E>(
    cfg: &SeedSearchConfig,
    candidates: Vec<usize>,
    trials: Vec<Trial>,
) -> Result<SeedSearchOutcome, SeedSearchError<E>> {
    let best = best_trial(&trials)
        .cloned()
        .ok_or_else(|| SeedSearchError::InvalidConfig("no trials were run".to_string()))?;
    Ok(SeedSearchOutcome {
        nu: best.seed,
        best_metric: best.metric,
        delta_q: cfg.delta_q(),
        candidates,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type R<T> = Result<T, SeedSearchError<String>>;

    #[test]
    fn default_penalty_is_four() {
        assert_eq!(SeedSearchConfig::default().delta_q(), 4);
    }

    #[test]
    fn penalty_formula() {
        let cfg = SeedSearchConfig {
            candidates: 3,
            trial_epochs: 2,
            repeats: 4,
            ..Default::default()
        };
        assert_eq!(cfg.delta_q(), 22);
    }

    #[test]
    fn single_candidate() {
        let cfg = SeedSearchConfig {
            min_seed: 7,
            max_seed: 7,
            candidates: 1,
            ..Default::default()
        };
        let out = select_seed(&cfg, 0, |_, _| Ok::<_, String>(0.3)).unwrap();
        assert_eq!((out.nu, out.delta_q), (7, 0));
    }

    #[test]
    fn ties_keep_the_smaller_seed() {
        let cfg = SeedSearchConfig::default();
        let out = select_seed(&cfg, 5, |_, _| Ok::<_, String>(0.5)).unwrap();
        assert_eq!(out.nu, out.candidates[0]);
    }

    #[test]
    fn strict_improvement_wins() {
        let cfg = SeedSearchConfig::default();
        let out = select_seed(&cfg, 5, |seed, _| Ok::<_, String>(seed as f64)).unwrap();
        assert_eq!(out.nu, *out.candidates.last().unwrap());
        assert_eq!(out.best_metric, out.nu as f64);
    }

    #[test]
    fn candidates_are_sorted_distinct_and_in_range() {
        let cfg = SeedSearchConfig::default();
        let c: Vec<usize> = sample_candidates::<String>(&cfg, 123).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.iter().all(|&s| (1..=10).contains(&s)));
        assert_eq!(c, sample_candidates::<String>(&cfg, 123).unwrap());
    }

    #[test]
    fn range_errors() {
        let cfg = SeedSearchConfig {
            min_seed: 3,
            max_seed: 4,
            candidates: 3,
            ..Default::default()
        };
        let r: R<Vec<usize>> = sample_candidates(&cfg, 0);
        assert!(matches!(r, Err(SeedSearchError::EmptyRange { .. })));
        let bad = SeedSearchConfig {
            max_seed: 21201,
            ..Default::default()
        };
        let r: R<Vec<usize>> = sample_candidates(&bad, 0);
        assert!(matches!(r, Err(SeedSearchError::InvalidConfig(_))));
    }

    #[test]
    fn failures_propagate() {
        let cfg = SeedSearchConfig::default();
        let r = select_seed(&cfg, 0, |_, _| Err::<f64, _>("diverged".to_string()));
        assert!(matches!(r, Err(SeedSearchError::TrainingFailure { .. })));
    }

    #[test]
    fn reduction_is_order_independent() {
        let trials = vec![
            Trial { seed: 4, repeat: 0, metric: 0.9 },
            Trial { seed: 2, repeat: 0, metric: 0.9 },
            Trial { seed: 3, repeat: 0, metric: 0.1 },
        ];
        let mut rev = trials.clone();
        rev.reverse();
        assert_eq!(best_trial(&trials).unwrap().seed, 2);
        assert_eq!(best_trial(&rev).unwrap().seed, 2);
    }
}
