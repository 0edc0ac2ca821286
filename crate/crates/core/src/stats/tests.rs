//! Two-sample rank tests.

use serde::{Deserialize, Serialize};

use super::summary::median;
use super::StatsError;
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `x` is shifted to the left of `y`.
    Less,
    /// `x` is shifted to the right of `y`.
    Greater,
}

/// Midranks (1-based) of `values`, plus the sizes of tied groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `W = (sum of ranks of x) - n_x (n_x + 1) / 2`.
    pub statistic: f64,
    pub p_value: f64,
    /// The null distribution was enumerated rather than approximated.
    pub exact: bool,
    /// Every value in both samples was identical; `p_value` is 1 by convention.
    pub degenerate: bool,
}

/// Samples below this size on both sides, without ties, get the exact null distribution.
pub const EXACT_LIMIT: usize = 50;

/// How the null distribution of the rank-sum statistic is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    /// Exact below `EXACT_LIMIT` on both sides without ties, otherwise asymptotic.
    Auto,
    /// Exact enumeration; falls back to asymptotic when there are ties.
    Exact,
    /// Normal approximation with tie-corrected variance and continuity correction.
    Asymptotic,
}

/// One-sided Mann–Whitney U (Wilcoxon rank-sum) test of `x` against `y`.
///
/// Small tie-free samples use the exact null distribution. Otherwise the
/// normal approximation with tie-corrected variance and a continuity
/// correction of 0.5 is used.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative) -> Result<MannWhitney, StatsError> {
    mann_whitney_u_with(x, y, alternative, UMethod::Auto)
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    method: UMethod,
) -> Result<MannWhitney, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (nx, ny) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w = ranks[..nx].iter().sum::<f64>() - (nx * (nx + 1)) as f64 / 2.0;
    if ties.first() == Some(&(nx + ny)) {
        return Ok(MannWhitney {
            statistic: w,
            p_value: 1.0,
            exact: false,
            degenerate: true,
        });
    }
    let exact = match method {
        UMethod::Auto => nx < EXACT_LIMIT && ny < EXACT_LIMIT,
        UMethod::Exact => true,
        UMethod::Asymptotic => false,
    };
    if exact && ties.is_empty() {
        let dist = rank_sum_distribution(nx, ny);
        let w_int = w.round() as usize;
        let p = match alternative {
            Alternative::Less => dist[..=w_int].iter().sum::<f64>(),
            Alternative::Greater => dist[w_int..].iter().sum::<f64>(),
        };
        return Ok(MannWhitney {
            statistic: w,
            p_value: p.min(1.0),
            exact: true,
            degenerate: false,
        });
    }
    let (m, n) = (nx as f64, ny as f64);
    let total = m + n;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
    let sigma = ((m * n / 12.0) * (total + 1.0 - tie_term)).sqrt();
    let z = w - m * n / 2.0;
    let p = match alternative {
        Alternative::Less => normal::cdf((z + 0.5) / sigma),
        Alternative::Greater => normal::cdf(-(z - 0.5) / sigma),
    };
    Ok(MannWhitney {
        statistic: w,
        p_value: p,
        exact: false,
        degenerate: false,
    })
}

/// Null probabilities of `W = 0 ..= m n` for sample sizes `m` and `n`.
pub fn rank_sum_distribution(m: usize, n: usize) -> Vec<f64> {
    let max_w = m * n;
    // ways[j][w]: subsets of size j from the items seen so far with statistic w,
    // where adding the item at position t (0-based) as the j-th pick adds t - (j - 1).
    let mut ways = vec![vec![0.0f64; max_w + 1]; m + 1];
    ways[0][0] = 1.0;
    for t in 0..m + n {
        for j in (1..=m.min(t + 1)).rev() {
            let shift = t + 1 - j;
            if shift > n {
                continue;
            }
            let (lower, upper) = ways.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for w in (shift..=max_w).rev() {
                cur[w] += prev[w - shift];
            }
        }
    }
    let total: f64 = ways[m].iter().sum();
    ways[m].iter().map(|c| c / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlignerKilleen {
    pub statistic: f64,
    pub p_value: f64,
    /// All normal scores were equal; `p_value` is 1 by convention.
    pub degenerate: bool,
}

/// Fligner–Killeen median-centred test of equal spread between two samples.
pub fn fligner_killeen(x: &[f64], y: &[f64]) -> Result<FlignerKilleen, StatsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2 });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (mx, my) = (median(x)?, median(y)?);
    let deviations: Vec<f64> = x
        .iter()
        .map(|v| (v - mx).abs())
        .chain(y.iter().map(|v| (v - my).abs()))
        .collect();
    let n = deviations.len() as f64;
    let (ranks, _) = midranks(&deviations);
    let scores: Vec<f64> = ranks
        .iter()
        .map(|r| normal::inverse_cdf((1.0 + r / (n + 1.0)) / 2.0).expect("score argument lies in (1/2, 1)"))
        .collect();
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if scores.iter().all(|&a| a == scores[0]) {
        return Ok(FlignerKilleen {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let (sx, sy) = scores.split_at(x.len());
    let group = |s: &[f64]| s.iter().sum::<f64>().powi(2) / s.len() as f64;
    let statistic = ((group(sx) + group(sy) - n * mean * mean) / var).max(0.0);
    // Chi-square survival function with one degree of freedom.
    let p_value = libm::erfc((statistic / 2.0).sqrt());
    Ok(FlignerKilleen {
        statistic,
        p_value,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![2]);
    }

    #[test]
    fn exact_hand_case() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.05).abs() < 1e-15);
        let g = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert!((g.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distribution_sums_to_one_and_is_symmetric() {
        let d = rank_sum_distribution(4, 6);
        assert_eq!(d.len(), 25);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for w in 0..25 {
            assert!((d[w] - d[24 - w]).abs() < 1e-15);
        }
        // C(10, 4) = 210 arrangements, one with W = 0.
        assert!((d[0] - 1.0 / 210.0).abs() < 1e-15);
    }

    #[test]
    fn normal_approximation_with_ties_matches_reference() {
        // Reference values from a rank-sum implementation with continuity and tie correction.
        let x = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 7.0, 8.0, 8.0, 9.0];
        let r = mann_whitney_u(&x, &y, Alternative::Less).unwrap();
        assert!(!r.exact);
        assert_eq!(r.statistic, 5.5);
        let sigma = ((6.0f64 * 7.0 / 12.0) * (14.0 - (24.0 + 6.0 + 6.0) / (13.0 * 12.0))).sqrt();
        let want = normal::cdf((5.5 - 21.0 + 0.5) / sigma);
        assert!((r.p_value - want).abs() < 1e-15);
        assert!((r.p_value - 0.015357736549355551).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let r = mann_whitney_u(&[0.5; 4], &[0.5; 3], Alternative::Greater).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn identical_vectors_do_not_reject() {
        let v = [0.1, 0.4, 0.2, 0.9, 0.5];
        for alt in [Alternative::Less, Alternative::Greater] {
            assert!(mann_whitney_u(&v, &v, alt).unwrap().p_value >= 0.5);
        }
    }

    #[test]
    fn fligner_symmetric_groups() {
        let r = fligner_killeen(&[1.0, 2.0, 3.0], &[11.0, 12.0, 13.0]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fligner_constant_input_is_degenerate() {
        let r = fligner_killeen(&[2.0; 5], &[2.0; 5]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        assert!(fligner_killeen(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fligner_detects_unequal_spread() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.001).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = fligner_killeen(&x, &y).unwrap();
        assert!((r.statistic - 25.662281031434297).abs() < 1e-9);
        assert!((r.p_value - 4.066989792847398e-07).abs() < 1e-15);
    }

    #[test]
    fn fligner_reference_case() {
        let x = [0.31, 0.12, 0.77, 0.45, 0.91, 0.05, 0.66];
        let y = [0.52, 0.81, 0.99, 0.6, 0.73, 0.88];
        let r = fligner_killeen(&x, &y).unwrap();
        assert!((r.statistic - 2.485201369829325).abs() < 1e-9);
        assert!((r.p_value - 0.11492163882254104).abs() < 1e-10);
    }

    #[test]
    fn exact_reference_case() {
        let x = [0.31, 0.12, 0.77, 0.45, 0.91, 0.05, 0.66];
        let y = [0.52, 0.81, 0.99, 0.6, 0.73, 0.88];
        let r = mann_whitney_u(&x, &y, Alternative::Less).unwrap();
        assert_eq!(r.statistic, 10.0);
        assert!((r.p_value - 0.06876456876456877).abs() < 1e-14);
    }
}
