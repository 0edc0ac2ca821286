use std::path::Path;

use crate::compare::ComparisonRecord;
use crate::error::HarnessError;
use crate::store::write_atomic;

/// Plotted E values are clipped to this many percent.
pub const EFFICIENCY_PLOT_CAP: f64 = 100.0;
pub const ALPHA_BIN_WIDTH: f64 = 0.05;

fn label(rec: &ComparisonRecord) -> String {
    let m = &rec.result.meta;
    format!("{}/{}/{}/{}", m.dataset, m.model, m.optimizer, m.initializer)
}

fn thresholds(records: &[ComparisonRecord]) -> Vec<f64> {
    records
        .first()
        .map(|r| r.result.thresholds.iter().map(|t| t.threshold).collect())
        .unwrap_or_default()
}

fn grid(records: &[ComparisonRecord], cell: impl Fn(&qrinit::stats::ThresholdMetrics) -> Option<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["configuration".to_string()];
    header.extend(thresholds(records).iter().map(|a| format!("{a:.2}")));
    w.write_record(&header).expect("in-memory write");
    for rec in records {
        let mut row = vec![label(rec)];
        row.extend(rec.result.thresholds.iter().map(|t| cell(t).map_or_else(String::new, |v| v.to_string())));
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Configurations by thresholds, E clipped to the plot cap. Blank cells mean
/// neither arm reached the threshold.
pub fn efficiency_grid(records: &[ComparisonRecord]) -> Vec<u8> {
    grid(records, |t| t.efficiency.map(|e| e.min(EFFICIENCY_PLOT_CAP)))
}

/// Configurations by thresholds, D values.
pub fn variability_grid(records: &[ComparisonRecord]) -> Vec<u8> {
    grid(records, |t| t.variability)
}

/// Histogram of `A_Q_max - A_P_max` with bins aligned to multiples of the bin width.
pub fn alpha_histogram(records: &[ComparisonRecord]) -> Vec<(f64, f64, usize)> {
    let alphas: Vec<f64> = records.iter().map(|r| r.result.alpha()).collect();
    if alphas.is_empty() {
        return Vec::new();
    }
    let bin = |a: f64| (a / ALPHA_BIN_WIDTH).floor() as i64;
    let lo = alphas.iter().map(|&a| bin(a)).min().unwrap_or(0);
    let hi = alphas.iter().map(|&a| bin(a)).max().unwrap_or(0);
    (lo..=hi)
        .map(|b| {
            let count = alphas.iter().filter(|&&a| bin(a) == b).count();
            (b as f64 * ALPHA_BIN_WIDTH, (b + 1) as f64 * ALPHA_BIN_WIDTH, count)
        })
        .collect()
}

pub fn write_plot_data(dir: &Path, records: &[ComparisonRecord]) -> Result<(), HarnessError> {
    write_atomic(&dir.join("efficiency_grid.csv"), &efficiency_grid(records))?;
    write_atomic(&dir.join("variability_grid.csv"), &variability_grid(records))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["configuration", "a_q_max", "a_p_max", "alpha"]).expect("in-memory write");
    for rec in records {
        let r = &rec.result;
        w.write_record([label(rec), r.a_q_max.to_string(), r.a_p_max.to_string(), r.alpha().to_string()])
            .expect("in-memory write");
    }
    write_atomic(&dir.join("alpha_values.csv"), &w.into_inner().expect("in-memory flush"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_low", "bin_high", "count"]).expect("in-memory write");
    for (lo, hi, n) in alpha_histogram(records) {
        w.write_record([format!("{lo:.2}"), format!("{hi:.2}"), n.to_string()]).expect("in-memory write");
    }
    write_atomic(&dir.join("alpha_histogram.csv"), &w.into_inner().expect("in-memory flush"))
}
