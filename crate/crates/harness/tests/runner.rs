mod common;

use std::sync::Arc;

use qrinit::data::PixelScaling;
use qrinit::initializers::InitializerSpec;
use qrinit::nn::OptimizerConfig;
use qrinit::seed_select::SeedSearchConfig;
use qrinit::sobol::DirectionNumberTable;
use qrinit_harness::runner::RepetitionStatus;
use qrinit_harness::store::{self, load_trace, Manifest};
use qrinit_harness::{Arm, Context, ExperimentPlan, HarnessError, ModelVariant, PreparedData, SearchScope, SeedPolicy};

fn context(dir: &std::path::Path) -> Context {
    common::synthetic_mnist(dir, 200, 80);
    Context {
        table: Arc::new(DirectionNumberTable::bundled()),
        data: Arc::new(PreparedData::load(dir, PixelScaling::UnitInterval).unwrap()),
    }
}

fn plan(arm: Arm) -> ExperimentPlan {
    let mut p = ExperimentPlan::new(
        ModelVariant::SingleLayer { units: 4 },
        OptimizerConfig::adam(),
        InitializerSpec::GlorotUniform,
        arm,
    );
    p.repetitions = 2;
    p.epochs = 1;
    p.pixel_scaling = PixelScaling::UnitInterval;
    p
}

fn auto(scope: SearchScope, warm_start: bool) -> Arm {
    Arm::Qrng {
        seed: SeedPolicy::Auto {
            search: SeedSearchConfig {
                warm_start,
                ..SeedSearchConfig::default()
            },
            scope,
        },
    }
}

#[test]
fn trace_shape_and_layer_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let run = ctx.run_plan(&plan(Arm::Prng)).unwrap();
    assert_eq!(run.accuracy_rows().len(), 2);
    assert!(run.accuracy_rows().iter().all(|r| r.len() == 1));
    for rec in &run.records {
        assert_eq!(rec.nu, None);
        assert_eq!(rec.layer_sources.len(), 2);
        assert_eq!(rec.status, RepetitionStatus::Complete);
    }
    assert_ne!(run.records[0].shuffle_seed, run.records[1].shuffle_seed);
}

#[test]
fn manifest_rederives_the_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(&tmp.path().join("data"));
    let out = tmp.path().join("out");
    let p = plan(Arm::Qrng {
        seed: SeedPolicy::Fixed { nu: 3 },
    });
    let run = ctx.run_plan(&p).unwrap();
    let dir = store::save_run(&out, &run, ctx.table.max_dimension()).unwrap();
    let stored = load_trace(&dir).unwrap();
    assert_eq!(stored.manifest.plan, p);
    assert_eq!(stored.manifest.plan.hash(), dir.file_name().unwrap().to_str().unwrap());
    assert_eq!(stored.trace.repetitions(), 2);
    let m: Manifest = store::read_json(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.repetitions[0].nu, Some(3));
    assert!(store::completed(&out, &p).is_some());
}

#[test]
fn cache_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let p = plan(Arm::Qrng {
        seed: SeedPolicy::Fixed { nu: 2 },
    });
    let mut cached = p.clone();
    cached.sobol_cache = true;
    assert_eq!(ctx.run_plan(&p).unwrap().accuracy_rows(), ctx.run_plan(&cached).unwrap().accuracy_rows());
}

#[test]
fn per_plan_search_shares_one_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let run = ctx.run_plan(&plan(auto(SearchScope::PerPlan, false))).unwrap();
    let outcome = run.plan_search.as_ref().unwrap();
    assert_eq!(outcome.delta_q, 4);
    assert!(run.records.iter().all(|r| r.nu == Some(outcome.nu) && r.seed_search.is_none()));
}

#[test]
fn warm_start_continues_the_winning_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let mut p = plan(auto(SearchScope::PerRepetition, true));
    p.epochs = 2;
    let run = ctx.run_plan(&p).unwrap();
    for rec in &run.records {
        let search = rec.seed_search.as_ref().unwrap();
        assert_eq!(rec.accuracies.len(), 2);
        assert_eq!(rec.accuracies[0], search.best_metric);
    }
    assert!(matches!(
        ctx.run_plan(&plan(auto(SearchScope::PerPlan, true))),
        Err(HarnessError::InvalidPlan(_))
    ));
}

#[test]
fn scaling_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let mut p = plan(Arm::Prng);
    p.pixel_scaling = PixelScaling::Raw;
    assert!(matches!(ctx.run_plan(&p), Err(HarnessError::InvalidPlan(_))));
}

#[test]
fn search_only_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = context(tmp.path());
    let p = plan(auto(SearchScope::PerRepetition, false));
    let cfg = SeedSearchConfig::default();
    let a = ctx.search_only(&p, &cfg, 0).unwrap();
    let b = ctx.search_only(&p, &cfg, 0).unwrap();
    assert_eq!(a, b);
    assert!((1..=10).contains(&a.nu));
    assert_eq!(ctx.run_plan(&p).unwrap().records[0].seed_search.as_ref(), Some(&a));
}
