//! Accuracy summaries, quasirandom-versus-pseudorandom comparison metrics,
//! verdict rules, and outcome aggregation.

mod metrics;
mod summary;
mod tests;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    efficiency_e, first_epoch_reaching, threshold_grid, threshold_metrics, variability_d, Bound, EpochReach,
    EpochSummary, ThresholdMetrics,
};
pub use summary::{median, median_iqr, quantile_sorted, MedianIqr};
pub use tests::{
    fligner_killeen, mann_whitney_u, mann_whitney_u_with, midranks, rank_sum_distribution, Alternative, FlignerKilleen,
    MannWhitney, UMethod, EXACT_LIMIT,
};

use crate::nn::AccuracyTrace;

pub const SIGNIFICANCE: f64 = 0.05;
/// IQR differences within this band count as a tie.
pub const SPREAD_TIE_BAND: f64 = 0.01;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("need at least {needed} samples per group")]
    TooFewSamples { needed: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("traces are not comparable: {0}")]
    MetadataMismatch(String),
    #[error("verdicts ({0}, {1}, {2}) match no outcome rule")]
    UnmappedPermutation(Verdict, Verdict, Verdict),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Win,
    Tie,
    Loss,
}

impl Verdict {
    pub fn letter(self) -> char {
        match self {
            Self::Win => 'w',
            Self::Tie => 't',
            Self::Loss => 'l',
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Win => "win",
            Self::Tie => "tie",
            Self::Loss => "loss",
        })
    }
}

/// Final outcome of a comparison, named by its `result:accuracy,speed,spread` mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "l:l,*,*")]
    LowerAccuracy,
    #[serde(rename = "l:t,l,*")]
    ComparableSlower,
    #[serde(rename = "t:t,t,t")]
    Comparable,
    #[serde(rename = "w:t,w,wt")]
    ComparableFaster,
    #[serde(rename = "w:w,l,*")]
    HigherSlower,
    #[serde(rename = "w:w,t,wt")]
    HigherSimultaneous,
    #[serde(rename = "w:w,w,l")]
    HigherFasterMoreSpread,
    #[serde(rename = "w:w,w,wt")]
    HigherFaster,
    #[serde(rename = "unmapped")]
    Unmapped,
}

impl Outcome {
    pub const MAPPED: [Outcome; 8] = [
        Self::LowerAccuracy,
        Self::ComparableSlower,
        Self::Comparable,
        Self::ComparableFaster,
        Self::HigherSlower,
        Self::HigherSimultaneous,
        Self::HigherFasterMoreSpread,
        Self::HigherFaster,
    ];

    pub fn mask(self) -> &'static str {
        match self {
            Self::LowerAccuracy => "l:l,*,*",
            Self::ComparableSlower => "l:t,l,*",
            Self::Comparable => "t:t,t,t",
            Self::ComparableFaster => "w:t,w,wt",
            Self::HigherSlower => "w:w,l,*",
            Self::HigherSimultaneous => "w:w,t,wt",
            Self::HigherFasterMoreSpread => "w:w,w,l",
            Self::HigherFaster => "w:w,w,wt",
            Self::Unmapped => "unmapped",
        }
    }

    /// Overall result: win, tie or loss; `None` for unmapped triples.
    pub fn result(self) -> Option<Verdict> {
        match self.mask().as_bytes()[0] {
            b'w' => Some(Verdict::Win),
            b't' => Some(Verdict::Tie),
            b'l' => Some(Verdict::Loss),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mask())
    }
}

/// Maps the accuracy, speed and spread verdicts to an outcome mask.
pub fn final_outcome(s_a: Verdict, s_e: Verdict, s_d: Verdict) -> Result<Outcome, StatsError> {
    use Verdict::{Loss as L, Tie as T, Win as W};
    let outcome = match (s_a, s_e, s_d) {
        (L, _, _) => Outcome::LowerAccuracy,
        (T, L, _) => Outcome::ComparableSlower,
        (T, T, T) => Outcome::Comparable,
        (T, W, W | T) => Outcome::ComparableFaster,
        (W, L, _) => Outcome::HigherSlower,
        (W, T, W | T) => Outcome::HigherSimultaneous,
        (W, W, L) => Outcome::HigherFasterMoreSpread,
        (W, W, W | T) => Outcome::HigherFaster,
        _ => return Err(StatsError::UnmappedPermutation(s_a, s_e, s_d)),
    };
    Ok(outcome)
}

/// Accuracy verdict from the one-sided U tests of pseudorandom against quasirandom accuracies.
pub fn accuracy_verdict(p_less: f64, p_greater: f64) -> Verdict {
    if p_less < SIGNIFICANCE {
        Verdict::Win
    } else if p_greater < SIGNIFICANCE {
        Verdict::Loss
    } else {
        Verdict::Tie
    }
}

/// Speed verdict: the sign of E(A_m), decided on whole epochs.
pub fn speed_verdict(e_q: usize, e_p: usize, delta_q: usize) -> Verdict {
    match (e_q + delta_q).cmp(&e_p) {
        std::cmp::Ordering::Less => Verdict::Win,
        std::cmp::Ordering::Equal => Verdict::Tie,
        std::cmp::Ordering::Greater => Verdict::Loss,
    }
}

/// Spread verdict from D(A_m) gated on the Fligner–Killeen p-value.
pub fn spread_verdict(d: f64, fk_p: f64) -> Verdict {
    if fk_p >= SIGNIFICANCE {
        Verdict::Tie
    } else if d < -SPREAD_TIE_BAND {
        Verdict::Win
    } else if d > SPREAD_TIE_BAND {
        Verdict::Loss
    } else {
        Verdict::Tie
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMeta {
    pub dataset: String,
    pub model: String,
    pub optimizer: String,
    pub initializer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub meta: ComparisonMeta,
    pub repetitions_q: usize,
    pub repetitions_p: usize,
    pub epochs: usize,
    pub delta_q: usize,
    pub a_p_max: f64,
    pub a_q_max: f64,
    pub epoch_p_max: usize,
    pub epoch_q_max: usize,
    pub a_m: f64,
    pub e_q_at_am: usize,
    pub e_p_at_am: usize,
    pub e_at_am: f64,
    pub d_at_am: f64,
    pub u_test_p_less: f64,
    pub u_test_p_greater: f64,
    pub u_test_exact: bool,
    pub u_test_degenerate: bool,
    pub fk_p: f64,
    pub fk_degenerate: bool,
    pub s_a: Verdict,
    pub s_e: Verdict,
    pub s_d: Verdict,
    pub outcome: Outcome,
    pub thresholds: Vec<ThresholdMetrics>,
}

impl ComparisonResult {
    /// `A_Q_max - A_P_max`.
    pub fn alpha(&self) -> f64 {
        self.a_q_max - self.a_p_max
    }
}

/// Compares a quasirandom trace `q` with a pseudorandom trace `p` of the same
/// configuration.
pub fn compare_traces(
    q: &AccuracyTrace,
    p: &AccuracyTrace,
    delta_q: usize,
    thresholds: &[f64],
) -> Result<ComparisonResult, StatsError> {
    let (mq, mp) = (&q.meta, &p.meta);
    for (what, a, b) in [
        ("dataset", &mq.dataset, &mp.dataset),
        ("model", &mq.model, &mp.model),
        ("optimizer", &mq.optimizer, &mp.optimizer),
        ("initializer", &mq.initializer, &mp.initializer),
    ] {
        if a != b {
            return Err(StatsError::MetadataMismatch(format!("{what} differs: {a} vs {b}")));
        }
    }
    if q.epochs() != p.epochs() {
        return Err(StatsError::MetadataMismatch(format!(
            "epoch counts differ: {} vs {}",
            q.epochs(),
            p.epochs()
        )));
    }
    let sq = EpochSummary::from_trace(q)?;
    let sp = EpochSummary::from_trace(p)?;
    let (a_q_max, epoch_q_max) = sq.max_median();
    let (a_p_max, epoch_p_max) = sp.max_median();

    let zeta = p.column(epoch_p_max);
    let eta = q.column(epoch_q_max);
    let less = mann_whitney_u(&zeta, &eta, Alternative::Less)?;
    let greater = mann_whitney_u(&zeta, &eta, Alternative::Greater)?;
    let s_a = accuracy_verdict(less.p_value, greater.p_value);

    let a_m = a_p_max.min(a_q_max);
    let e_q = sq.first_reaching(a_m).epoch();
    let e_p = sp.first_reaching(a_m).epoch();
    let e_at_am = efficiency_e(e_q, e_p, delta_q);
    let d_at_am = sq.iqrs[e_q - 1] - sp.iqrs[e_p - 1];
    let fk = fligner_killeen(&q.column(e_q), &p.column(e_p))?;
    let s_e = speed_verdict(e_q, e_p, delta_q);
    let s_d = spread_verdict(d_at_am, fk.p_value);
    let outcome = final_outcome(s_a, s_e, s_d).unwrap_or(Outcome::Unmapped);

    Ok(ComparisonResult {
        meta: ComparisonMeta {
            dataset: mq.dataset.clone(),
            model: mq.model.clone(),
            optimizer: mq.optimizer.clone(),
            initializer: mq.initializer.clone(),
        },
        repetitions_q: q.repetitions(),
        repetitions_p: p.repetitions(),
        epochs: q.epochs(),
        delta_q,
        a_p_max,
        a_q_max,
        epoch_p_max,
        epoch_q_max,
        a_m,
        e_q_at_am: e_q,
        e_p_at_am: e_p,
        e_at_am,
        d_at_am,
        u_test_p_less: less.p_value,
        u_test_p_greater: greater.p_value,
        u_test_exact: less.exact,
        u_test_degenerate: less.degenerate,
        fk_p: fk.p_value,
        fk_degenerate: fk.degenerate,
        s_a,
        s_e,
        s_d,
        outcome,
        thresholds: thresholds
            .iter()
            .map(|&a| threshold_metrics(&sq, &sp, a, delta_q))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    All,
    Dataset,
    Model,
    Optimizer,
    Initializer,
}

impl Facet {
    fn key(self, r: &ComparisonResult) -> String {
        match self {
            Self::All => "all".to_string(),
            Self::Dataset => r.meta.dataset.clone(),
            Self::Model => r.meta.model.clone(),
            Self::Optimizer => r.meta.optimizer.clone(),
            Self::Initializer => r.meta.initializer.clone(),
        }
    }
}

/// Outcome counts and means for one facet value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub facet: String,
    pub comparisons: usize,
    pub counts: BTreeMap<Outcome, usize>,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub mean_alpha: f64,
    pub mean_e_at_am: f64,
}

pub fn aggregate(results: &[ComparisonResult], facet: Facet) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<String, Vec<&ComparisonResult>> = BTreeMap::new();
    for r in results {
        groups.entry(facet.key(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| {
            let mut counts = BTreeMap::new();
            for r in &rs {
                *counts.entry(r.outcome).or_insert(0) += 1;
            }
            let count_result = |v| rs.iter().filter(|r| r.outcome.result() == Some(v)).count();
            let n = rs.len() as f64;
            SummaryRow {
                facet: key,
                comparisons: rs.len(),
                wins: count_result(Verdict::Win),
                ties: count_result(Verdict::Tie),
                losses: count_result(Verdict::Loss),
                counts,
                mean_alpha: rs.iter().map(|r| r.alpha()).sum::<f64>() / n,
                mean_e_at_am: rs.iter().map(|r| r.e_at_am).sum::<f64>() / n,
            }
        })
        .collect()
}
