//! Epoch-to-accuracy efficiency and spread metrics.

use serde::{Deserialize, Serialize};

use super::summary::median_iqr;
use super::StatsError;
use crate::nn::AccuracyTrace;

/// Median and IQR of accuracy at every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub medians: Vec<f64>,
    pub iqrs: Vec<f64>,
    pub repetitions: usize,
}

impl EpochSummary {
    pub fn from_trace(trace: &AccuracyTrace) -> Result<Self, StatsError> {
        let mut medians = Vec::with_capacity(trace.epochs());
        let mut iqrs = Vec::with_capacity(trace.epochs());
        for epoch in 1..=trace.epochs() {
            let m = median_iqr(&trace.column(epoch))?;
            medians.push(m.median);
            iqrs.push(m.iqr);
        }
        Ok(Self {
            medians,
            iqrs,
            repetitions: trace.repetitions(),
        })
    }

    pub fn epochs(&self) -> usize {
        self.medians.len()
    }

    /// Highest median accuracy and the first epoch (1-based) attaining it.
    pub fn max_median(&self) -> (f64, usize) {
        let mut best = (self.medians[0], 1);
        for (i, &m) in self.medians.iter().enumerate() {
            if m > best.0 {
                best = (m, i + 1);
            }
        }
        best
    }

    pub fn first_reaching(&self, threshold: f64) -> EpochReach {
        first_epoch_reaching(&self.medians, threshold)
    }

    /// IQR at a reached epoch; `None` when the threshold was never reached.
    pub fn iqr_at(&self, reach: EpochReach) -> Option<f64> {
        match reach {
            EpochReach::Reached(e) => Some(self.iqrs[e - 1]),
            EpochReach::NotReached { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochReach {
    Reached(usize),
    /// Never reached; `sentinel` is the epoch budget plus one.
    NotReached { sentinel: usize },
}

impl EpochReach {
    /// The reached epoch, or the sentinel.
    pub fn epoch(self) -> usize {
        match self {
            Self::Reached(e) => e,
            Self::NotReached { sentinel } => sentinel,
        }
    }

    pub fn reached(self) -> bool {
        matches!(self, Self::Reached(_))
    }
}

/// Smallest 1-based epoch whose median accuracy is at least `threshold`.
pub fn first_epoch_reaching(medians: &[f64], threshold: f64) -> EpochReach {
    medians
        .iter()
        .position(|&m| m >= threshold)
        .map_or(EpochReach::NotReached { sentinel: medians.len() + 1 }, |i| EpochReach::Reached(i + 1))
}

/// Percentage change in epochs to accuracy, charging `delta_q` search epochs
/// to the quasirandom arm: `(e_q + delta_q - e_p) / e_p * 100`.
pub fn efficiency_e(e_q: usize, e_p: usize, delta_q: usize) -> f64 {
    ((e_q + delta_q) as f64 - e_p as f64) / e_p as f64 * 100.0
}

/// Difference of IQRs, `iqr_q - iqr_p`; `None` (indeterminate) if either side is.
pub fn variability_d(iqr_q: Option<f64>, iqr_p: Option<f64>) -> Option<f64> {
    Some(iqr_q? - iqr_p?)
}

/// Accuracy thresholds 0.10, 0.15, ..., 0.95.
pub fn threshold_grid() -> Vec<f64> {
    (0..18).map(|i| (10 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Exact,
    /// The pseudorandom arm never reached the threshold, so the true value is lower.
    UpperBound,
    /// The quasirandom arm never reached the threshold, so the true value is higher.
    LowerBound,
}

/// E(A) and D(A) at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub e_q: EpochReach,
    pub e_p: EpochReach,
    /// `None` when neither arm reached the threshold.
    pub efficiency: Option<f64>,
    pub bound: Bound,
    pub variability: Option<f64>,
}

pub fn threshold_metrics(q: &EpochSummary, p: &EpochSummary, threshold: f64, delta_q: usize) -> ThresholdMetrics {
    let e_q = q.first_reaching(threshold);
    let e_p = p.first_reaching(threshold);
    let (efficiency, bound) = match (e_q.reached(), e_p.reached()) {
        (false, false) => (None, Bound::Exact),
        (true, true) => (Some(efficiency_e(e_q.epoch(), e_p.epoch(), delta_q)), Bound::Exact),
        (true, false) => (Some(efficiency_e(e_q.epoch(), e_p.epoch(), delta_q)), Bound::UpperBound),
        (false, true) => (Some(efficiency_e(e_q.epoch(), e_p.epoch(), delta_q)), Bound::LowerBound),
    };
    ThresholdMetrics {
        threshold,
        e_q,
        e_p,
        efficiency,
        bound,
        variability: variability_d(q.iqr_at(e_q), p.iqr_at(e_p)),
    }
}
