use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrinit::stats::{compare_traces, ComparisonResult};

use crate::error::HarnessError;
use crate::plan::{short_digest, Arm, ExperimentPlan, SCHEMA_VERSION};
use crate::store::{write_atomic, write_json, StoredTrace};

pub const COMPARE_DIR: &str = "compare";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub schema_version: u32,
    pub pair_hash: String,
    pub qrng_plan_hash: String,
    pub prng_plan_hash: String,
    pub result: ComparisonResult,
}

pub fn pair_hash(q: &ExperimentPlan, p: &ExperimentPlan) -> String {
    short_digest(format!("{}:{}", q.hash(), p.hash()).as_bytes())
}

/// Checks that two plans form a comparison pair: `q` is the quasirandom arm,
/// `p` the pseudorandom arm, and nothing else differs.
pub fn check_pair(q: &ExperimentPlan, p: &ExperimentPlan) -> Result<(), HarnessError> {
    if !matches!(q.arm, Arm::Qrng { .. }) || p.arm != Arm::Prng {
        return Err(HarnessError::MetadataMismatch(format!(
            "expected a qrng trace and a prng trace, got {} and {}",
            q.arm.label(),
            p.arm.label()
        )));
    }
    let strip = |plan: &ExperimentPlan| ExperimentPlan {
        arm: Arm::Prng,
        sobol_cache: false,
        ..plan.clone()
    };
    let (sq, sp) = (strip(q), strip(p));
    if sq != sp {
        return Err(HarnessError::MetadataMismatch(format!(
            "plans differ beyond the source arm: `{}` vs `{}`",
            describe_full(&sq),
            describe_full(&sp)
        )));
    }
    Ok(())
}

fn describe_full(p: &ExperimentPlan) -> String {
    format!(
        "{} reps={} epochs={} batch={} master_seed={} pixels={:?} lr={}",
        p.describe(),
        p.repetitions,
        p.epochs,
        p.batch_size,
        p.master_seed,
        p.pixel_scaling,
        p.optimizer.lr()
    )
}

pub fn compare(q: &StoredTrace, p: &StoredTrace, thresholds: &[f64]) -> Result<ComparisonRecord, HarnessError> {
    let (qp, pp) = (&q.manifest.plan, &p.manifest.plan);
    check_pair(qp, pp)?;
    let result = compare_traces(&q.trace, &p.trace, q.manifest.delta, thresholds)?;
    Ok(ComparisonRecord {
        schema_version: SCHEMA_VERSION,
        pair_hash: pair_hash(qp, pp),
        qrng_plan_hash: qp.hash(),
        prng_plan_hash: pp.hash(),
        result,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Header and values of the flat per-comparison CSV row.
pub fn comparison_row(rec: &ComparisonRecord) -> Vec<(&'static str, String)> {
    let r = &rec.result;
    vec![
        ("schema_version", rec.schema_version.to_string()),
        ("pair_hash", rec.pair_hash.clone()),
        ("qrng_plan_hash", rec.qrng_plan_hash.clone()),
        ("prng_plan_hash", rec.prng_plan_hash.clone()),
        ("dataset", r.meta.dataset.clone()),
        ("model", r.meta.model.clone()),
        ("optimizer", r.meta.optimizer.clone()),
        ("initializer", r.meta.initializer.clone()),
        ("repetitions_q", r.repetitions_q.to_string()),
        ("repetitions_p", r.repetitions_p.to_string()),
        ("epochs", r.epochs.to_string()),
        ("delta_q", r.delta_q.to_string()),
        ("a_p_max", r.a_p_max.to_string()),
        ("a_q_max", r.a_q_max.to_string()),
        ("alpha", r.alpha().to_string()),
        ("epoch_p_max", r.epoch_p_max.to_string()),
        ("epoch_q_max", r.epoch_q_max.to_string()),
        ("a_m", r.a_m.to_string()),
        ("e_q_at_am", r.e_q_at_am.to_string()),
        ("e_p_at_am", r.e_p_at_am.to_string()),
        ("e_at_am", r.e_at_am.to_string()),
        ("d_at_am", r.d_at_am.to_string()),
        ("u_test_p_less", r.u_test_p_less.to_string()),
        ("u_test_p_greater", r.u_test_p_greater.to_string()),
        ("u_test_exact", r.u_test_exact.to_string()),
        ("u_test_degenerate", r.u_test_degenerate.to_string()),
        ("fk_p", r.fk_p.to_string()),
        ("fk_degenerate", r.fk_degenerate.to_string()),
        ("s_a", r.s_a.letter().to_string()),
        ("s_e", r.s_e.letter().to_string()),
        ("s_d", r.s_d.letter().to_string()),
        ("outcome", r.outcome.mask().to_string()),
    ]
}

pub fn comparisons_csv(records: &[ComparisonRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = match records.first() {
        Some(first) => comparison_row(first).into_iter().map(|(k, _)| k).collect(),
        None => return Vec::new(),
    };
    w.write_record(&header).expect("in-memory write");
    for rec in records {
        w.write_record(comparison_row(rec).into_iter().map(|(_, v)| v)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn thresholds_csv(rec: &ComparisonRecord) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "e_q", "e_q_reached", "e_p", "e_p_reached", "efficiency", "bound", "variability"])
        .expect("in-memory write");
    for t in &rec.result.thresholds {
        w.write_record([
            format!("{:.2}", t.threshold),
            t.e_q.epoch().to_string(),
            t.e_q.reached().to_string(),
            t.e_p.epoch().to_string(),
            t.e_p.reached().to_string(),
            opt(t.efficiency),
            serde_json::to_value(t.bound).expect("bound serializes").as_str().unwrap_or("").to_string(),
            opt(t.variability),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn save_comparison(out: &Path, rec: &ComparisonRecord) -> Result<PathBuf, HarnessError> {
    let dir = out.join(COMPARE_DIR).join(&rec.pair_hash);
    write_json(&dir.join("comparison.json"), rec)?;
    write_atomic(&dir.join("comparison.csv"), &comparisons_csv(std::slice::from_ref(rec)))?;
    write_atomic(&dir.join("thresholds.csv"), &thresholds_csv(rec))?;
    Ok(dir)
}
