use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrinit::data::PixelScaling;
use qrinit::initializers::InitializerSpec;
use qrinit::nn::OptimizerConfig;
use qrinit::stats::{aggregate, Facet, SummaryRow};

use crate::compare::{compare, comparisons_csv, save_comparison, ComparisonRecord};
use crate::error::HarnessError;
use crate::plan::{Arm, ExperimentPlan, ModelVariant, SeedPolicy, SCHEMA_VERSION};
use crate::runner::Context;
use crate::store::{self, completed, load_trace, plan_dir, write_atomic, write_json};

/// Cartesian product of plan facets. Every cell yields a qrng/prng plan pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dataset: String,
    pub models: Vec<ModelVariant>,
    pub optimizers: Vec<OptimizerConfig>,
    pub initializers: Vec<InitializerSpec>,
    pub qrng_seed: SeedPolicy,
    pub repetitions: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub master_seed: u64,
    pub pixel_scaling: PixelScaling,
    #[serde(default)]
    pub sobol_cache: bool,
}

impl GridSpec {
    pub fn pairs(&self) -> Vec<(ExperimentPlan, ExperimentPlan)> {
        let mut pairs = Vec::new();
        for &model in &self.models {
            for &optimizer in &self.optimizers {
                for &initializer in &self.initializers {
                    let mut p = ExperimentPlan::new(model, optimizer, initializer, Arm::Prng);
                    p.dataset = self.dataset.clone();
                    p.repetitions = self.repetitions;
                    p.epochs = self.epochs;
                    p.batch_size = self.batch_size;
                    p.master_seed = self.master_seed;
                    p.pixel_scaling = self.pixel_scaling;
                    p.sobol_cache = self.sobol_cache;
                    let q = p.with_arm(Arm::Qrng { seed: self.qrng_seed });
                    pairs.push((q, p));
                }
            }
        }
        pairs
    }
}

/// Runs the plans that have no completed output yet and stores them. Returns
/// the output directory of every plan, in input order.
pub fn run_and_store(ctx: &Context, out: &Path, plans: &[ExperimentPlan]) -> Result<Vec<PathBuf>, HarnessError> {
    let mut pending: Vec<ExperimentPlan> = Vec::new();
    for plan in plans {
        if completed(out, plan).is_none() && !pending.iter().any(|p| p.hash() == plan.hash()) {
            pending.push(plan.clone());
        }
    }
    let runs = ctx.run_plans(&pending)?;
    for run in &runs {
        store::save_run(out, run, ctx.table.max_dimension())?;
    }
    if let Some(bad) = runs.iter().find(|r| !r.complete()) {
        return Err(HarnessError::Training(qrinit::nn::NnError::InvalidConfig(format!(
            "plan {} ({}) diverged; partial trace kept in {}",
            bad.hash,
            bad.plan.describe(),
            plan_dir(out, &bad.plan).display()
        ))));
    }
    Ok(plans.iter().map(|p| plan_dir(out, p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub schema_version: u32,
    pub spec: GridSpec,
    pub plan_hashes: Vec<String>,
    pub comparisons: Vec<ComparisonRecord>,
    pub summaries: Vec<FacetSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetSummary {
    pub facet: Facet,
    pub rows: Vec<SummaryRow>,
}

pub const SUMMARY_FACETS: [Facet; 5] = [Facet::All, Facet::Dataset, Facet::Model, Facet::Optimizer, Facet::Initializer];

pub fn summaries(records: &[ComparisonRecord]) -> Vec<FacetSummary> {
    let results: Vec<_> = records.iter().map(|r| r.result.clone()).collect();
    if results.is_empty() {
        return Vec::new();
    }
    SUMMARY_FACETS
        .iter()
        .map(|&facet| FacetSummary {
            facet,
            rows: aggregate(&results, facet),
        })
        .collect()
}

pub fn summary_csv(summary: &FacetSummary) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let masks: Vec<_> = qrinit::stats::Outcome::MAPPED
        .iter()
        .chain(std::iter::once(&qrinit::stats::Outcome::Unmapped))
        .copied()
        .collect();
    let mut header = vec!["facet".to_string(), "comparisons".into(), "wins".into(), "ties".into(), "losses".into()];
    header.extend(masks.iter().map(|m| m.mask().to_string()));
    header.extend(["mean_alpha".to_string(), "mean_e_at_am".into()]);
    w.write_record(&header).expect("in-memory write");
    for row in &summary.rows {
        let mut rec = vec![
            row.facet.clone(),
            row.comparisons.to_string(),
            row.wins.to_string(),
            row.ties.to_string(),
            row.losses.to_string(),
        ];
        rec.extend(masks.iter().map(|m| row.counts.get(m).copied().unwrap_or(0).to_string()));
        rec.extend([row.mean_alpha.to_string(), row.mean_e_at_am.to_string()]);
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn facet_name(f: Facet) -> String {
    serde_json::to_value(f).expect("facet serializes").as_str().unwrap_or("facet").to_string()
}

/// Runs every plan of the grid, compares each pair, and writes
/// `grid/<digest>/{grid.json, comparisons.csv, summary_<facet>.csv}`.
pub fn run_grid(ctx: &Context, out: &Path, spec: &GridSpec, thresholds: &[f64]) -> Result<(PathBuf, GridReport), HarnessError> {
    let pairs = spec.pairs();
    let plans: Vec<ExperimentPlan> = pairs.iter().flat_map(|(q, p)| [q.clone(), p.clone()]).collect();
    run_and_store(ctx, out, &plans)?;
    let mut comparisons = Vec::with_capacity(pairs.len());
    for (q, p) in &pairs {
        let tq = load_trace(&plan_dir(out, q))?;
        let tp = load_trace(&plan_dir(out, p))?;
        let rec = compare(&tq, &tp, thresholds)?;
        save_comparison(out, &rec)?;
        comparisons.push(rec);
    }
    let report = GridReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        plan_hashes: plans.iter().map(|p| p.hash()).collect(),
        summaries: summaries(&comparisons),
        comparisons,
    };
    let digest = crate::plan::short_digest(&serde_json::to_vec(spec).expect("spec serializes"));
    let dir = out.join("grid").join(digest);
    write_json(&dir.join("grid.json"), &report)?;
    write_atomic(&dir.join("comparisons.csv"), &comparisons_csv(&report.comparisons))?;
    for s in &report.summaries {
        write_atomic(&dir.join(format!("summary_{}.csv", facet_name(s.facet))), &summary_csv(s))?;
    }
    Ok((dir, report))
}
