use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrinit::nn::{AccuracyTrace, TraceMeta};
use qrinit::seed_select::SeedSearchOutcome;

use crate::error::HarnessError;
use crate::plan::{ExperimentPlan, SCHEMA_VERSION};
use crate::runner::{PlanRun, RepetitionRecord, RepetitionStatus};

pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub hash: String,
    pub plan: ExperimentPlan,
    pub status: RunStatus,
    /// Epochs charged to seed search.
    pub delta: usize,
    pub direction_max_dimension: usize,
    pub plan_seed_search: Option<SeedSearchOutcome>,
    pub repetitions: Vec<RepetitionRecord>,
    pub host: HostInfo,
}

impl Manifest {
    pub fn from_run(run: &PlanRun, direction_max_dimension: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            hash: run.hash.clone(),
            plan: run.plan.clone(),
            status: if run.complete() {
                RunStatus::Complete
            } else {
                RunStatus::Partial
            },
            delta: run.plan.delta(),
            direction_max_dimension,
            plan_seed_search: run.plan_search.clone(),
            repetitions: run.records.clone(),
            host: HostInfo::current(),
        }
    }
}

pub fn plan_dir(out: &Path, plan: &ExperimentPlan) -> PathBuf {
    out.join(plan.hash())
}

/// Writes via a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(HarnessError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(HarnessError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let bytes = fs::read(path).map_err(HarnessError::io(path))?;
    serde_json::from_slice(&bytes).map_err(|e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// `repetition,epoch,accuracy` rows; epochs are 1-based. Diverged repetitions
/// contribute only the epochs they finished.
pub fn trace_csv(records: &[RepetitionRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["repetition", "epoch", "accuracy"]).expect("in-memory write");
    for r in records {
        for (e, a) in r.accuracies.iter().enumerate() {
            w.write_record([r.repetition.to_string(), (e + 1).to_string(), format!("{a:.6}")])
                .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn save_run(out: &Path, run: &PlanRun, direction_max_dimension: usize) -> Result<PathBuf, HarnessError> {
    let dir = out.join(&run.hash);
    write_atomic(&dir.join(TRACE_FILE), &trace_csv(&run.records))?;
    write_json(&dir.join(MANIFEST_FILE), &Manifest::from_run(run, direction_max_dimension))?;
    Ok(dir)
}

/// Manifest of a finished run of `plan`, if one is stored.
pub fn completed(out: &Path, plan: &ExperimentPlan) -> Option<Manifest> {
    let path = plan_dir(out, plan).join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&path).ok()?;
    (manifest.status == RunStatus::Complete && manifest.plan.hash() == plan.hash()).then_some(manifest)
}

fn read_trace_rows(path: &Path) -> Result<BTreeMap<usize, Vec<(usize, f64)>>, HarnessError> {
    let bad = |message: String| HarnessError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["repetition", "epoch", "accuracy"] {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let rep: usize = field(0).parse().map_err(|_| bad(format!("bad repetition `{}`", field(0))))?;
        let epoch: usize = field(1).parse().map_err(|_| bad(format!("bad epoch `{}`", field(1))))?;
        let acc: f64 = field(2).parse().map_err(|_| bad(format!("bad accuracy `{}`", field(2))))?;
        rows.entry(rep).or_default().push((epoch, acc));
    }
    Ok(rows)
}

/// A stored plan run as a trace over its completed repetitions.
#[derive(Debug, Clone)]
pub struct StoredTrace {
    pub manifest: Manifest,
    pub trace: AccuracyTrace,
}

pub fn trace_meta(plan: &ExperimentPlan) -> TraceMeta {
    TraceMeta {
        dataset: plan.dataset.clone(),
        model: plan.model.to_string(),
        optimizer: plan.optimizer.name().to_string(),
        initializer: plan.initializer.to_string(),
        source: plan.arm.label().to_string(),
    }
}

pub fn load_trace(dir: &Path) -> Result<StoredTrace, HarnessError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let trace_path = dir.join(TRACE_FILE);
    let mut rows = read_trace_rows(&trace_path)?;
    let epochs = manifest.plan.epochs;
    let mut values = Vec::new();
    for record in &manifest.repetitions {
        if record.status != RepetitionStatus::Complete {
            continue;
        }
        let mut row = rows.remove(&record.repetition).unwrap_or_default();
        row.sort_by_key(|&(e, _)| e);
        if row.len() != epochs || row.iter().enumerate().any(|(i, &(e, _))| e != i + 1) {
            return Err(HarnessError::Format {
                path: trace_path.display().to_string(),
                message: format!("repetition {} does not cover epochs 1..={epochs}", record.repetition),
            });
        }
        values.push(row.into_iter().map(|(_, a)| a).collect());
    }
    let trace = AccuracyTrace::new(values, trace_meta(&manifest.plan))?;
    Ok(StoredTrace { manifest, trace })
}
