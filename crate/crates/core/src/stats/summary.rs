use super::StatsError;

/// Type-7 quantile (linear interpolation between order statistics, `h = (n - 1) p`)
/// of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianIqr {
    pub median: f64,
    pub iqr: f64,
}

pub fn median_iqr(samples: &[f64]) -> Result<MedianIqr, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(MedianIqr {
        median: quantile_sorted(&sorted, 0.5),
        iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
    })
}

pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    median_iqr(samples).map(|m| m.median)
}
