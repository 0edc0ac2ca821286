use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qrinit::data::{self, Dataset, PixelScaling};
use qrinit::nn::{self, Mlp, NnError, SparseRows, Split, TrainConfig, Trainer, WeightSource};
use qrinit::samplers::SourceTag;
use qrinit::seed_select::{self, SeedSearchConfig, SeedSearchOutcome, Trial};
use qrinit::seeding::{derive_seed, Stream};
use qrinit::sobol::{DirectionNumberTable, SobolCache, DEFAULT_CACHE_BUDGET_BYTES};

use crate::error::HarnessError;
use crate::plan::{Arm, ExperimentPlan, SearchScope, SeedPolicy};

/// Train and test features in sparse form, plus labels.
#[derive(Debug)]
pub struct PreparedData {
    pub train_x: SparseRows<f32>,
    pub train_labels: Vec<u8>,
    pub test_x: SparseRows<f32>,
    pub test_labels: Vec<u8>,
    pub scaling: PixelScaling,
}

impl PreparedData {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            train_x: ds.train.sparse(),
            train_labels: ds.train.labels.clone(),
            test_x: ds.test.sparse(),
            test_labels: ds.test.labels.clone(),
            scaling: ds.scaling,
        }
    }

    pub fn load(dir: &Path, scaling: PixelScaling) -> Result<Self, HarnessError> {
        Ok(Self::from_dataset(&data::load_mnist(dir, scaling)?))
    }

    pub fn train(&self) -> Split<'_, f32> {
        Split {
            x: &self.train_x,
            labels: &self.train_labels,
        }
    }

    pub fn test(&self) -> Split<'_, f32> {
        Split {
            x: &self.test_x,
            labels: &self.test_labels,
        }
    }
}

/// Shared, read-only inputs for running plans.
#[derive(Debug, Clone)]
pub struct Context {
    pub table: Arc<DirectionNumberTable>,
    pub data: Arc<PreparedData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepetitionStatus {
    Complete,
    Diverged { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub shuffle_seed: u32,
    pub pseudo_base_seed: u32,
    /// Sobol' dimension or MT19937 seed of each layer, input side first.
    pub layer_sources: Vec<SourceTag>,
    pub nu: Option<usize>,
    pub seed_search: Option<SeedSearchOutcome>,
    #[serde(flatten)]
    pub status: RepetitionStatus,
    #[serde(skip)]
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRun {
    pub plan: ExperimentPlan,
    pub hash: String,
    pub plan_search: Option<SeedSearchOutcome>,
    pub records: Vec<RepetitionRecord>,
}

impl PlanRun {
    pub fn complete(&self) -> bool {
        self.records.iter().all(|r| r.status == RepetitionStatus::Complete)
    }

    /// Accuracy matrix of the completed repetitions.
    pub fn accuracy_rows(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .filter(|r| r.status == RepetitionStatus::Complete)
            .map(|r| r.accuracies.clone())
            .collect()
    }
}

/// A trained model with the trainer state needed to continue it.
type Resumable = (Mlp<f32>, Trainer<f32>);

struct Seeds {
    shuffle: u32,
    pseudo_base: u32,
}

fn repetition_seeds(plan: &ExperimentPlan, repetition: usize) -> Seeds {
    Seeds {
        shuffle: derive_seed(plan.master_seed, repetition as u64, Stream::Shuffle),
        pseudo_base: derive_seed(plan.master_seed, repetition as u64, Stream::PseudoLayers),
    }
}

/// Candidate-sampling seed for the seed search; `None` means the plan-wide search.
fn search_seed(plan: &ExperimentPlan, repetition: Option<usize>) -> u32 {
    match repetition {
        Some(r) => derive_seed(plan.master_seed, r as u64, Stream::SeedSearch),
        None => derive_seed(plan.master_seed, u64::MAX, Stream::SeedSearch),
    }
}

fn train_config(plan: &ExperimentPlan, epochs: usize, shuffle_seed: u32) -> TrainConfig {
    TrainConfig {
        optimizer: plan.optimizer,
        epochs,
        batch_size: plan.batch_size,
        shuffle_seed,
    }
}

impl Context {
    fn check(&self, plan: &ExperimentPlan) -> Result<(), HarnessError> {
        plan.validate()?;
        if plan.pixel_scaling != self.data.scaling {
            return Err(HarnessError::InvalidPlan(format!(
                "plan expects {:?} pixels but the loaded data is {:?}",
                plan.pixel_scaling, self.data.scaling
            )));
        }
        if let Arm::Qrng {
            seed:
                SeedPolicy::Auto {
                    search,
                    scope: SearchScope::PerPlan,
                },
        } = plan.arm
        {
            if search.warm_start {
                return Err(HarnessError::InvalidPlan(
                    "warm start needs a per-repetition seed search".into(),
                ));
            }
        }
        Ok(())
    }

    /// Table covering every Sobol' draw the plan can make, when caching is on.
    fn cache_for(&self, plan: &ExperimentPlan) -> Result<Option<Arc<SobolCache>>, HarnessError> {
        if !plan.sobol_cache {
            return Ok(None);
        }
        let cfg = plan.model.config(plan.initializer)?;
        let highest_start = match plan.arm {
            Arm::Prng => return Ok(None),
            Arm::Qrng {
                seed: SeedPolicy::Fixed { nu },
            } => nu,
            Arm::Qrng {
                seed: SeedPolicy::Auto { search, .. },
            } => search.max_seed,
        };
        let dims = (highest_start + cfg.quasi_layer_count() - 1).min(self.table.max_dimension());
        let n_max = cfg.layer_shapes().iter().map(|(r, c)| r * c).max().unwrap_or(1);
        let cache = SobolCache::build(&self.table, n_max, dims, DEFAULT_CACHE_BUDGET_BYTES)?;
        Ok(Some(Arc::new(cache)))
    }

    fn build(
        &self,
        plan: &ExperimentPlan,
        start: Option<usize>,
        pseudo_base: u32,
        cache: &Option<Arc<SobolCache>>,
    ) -> Result<(Mlp<f32>, Vec<SourceTag>), HarnessError> {
        let cfg = plan.model.config(plan.initializer)?;
        let source = match start {
            Some(start) => WeightSource::Quasi {
                table: Arc::clone(&self.table),
                start,
                cache: cache.clone(),
            },
            None => WeightSource::Pseudo,
        };
        Ok(nn::build_model(&cfg, &source, pseudo_base)?)
    }

    /// Runs the trials of one seed search. With `keep_best`, also returns the
    /// winning trial's model and trainer so training can continue from it.
    fn seed_search(
        &self,
        plan: &ExperimentPlan,
        search: &SeedSearchConfig,
        trial_rng_seed: u32,
        pseudo_base: u32,
        cache: &Option<Arc<SobolCache>>,
        keep_best: bool,
    ) -> Result<(SeedSearchOutcome, Option<Resumable>), HarnessError> {
        let fail = |e: String| HarnessError::SeedSearch(e);
        let candidates = seed_select::sample_candidates::<String>(search, trial_rng_seed).map_err(|e| fail(e.to_string()))?;
        let mut trials = Vec::new();
        let mut best: Option<(f64, Mlp<f32>, Trainer<f32>)> = None;
        for &seed in &candidates {
            for repeat in 0..search.repeats {
                let shuffle = derive_seed(trial_rng_seed as u64, repeat as u64, Stream::Shuffle);
                let (mut model, _) = self.build(plan, Some(seed), pseudo_base, cache)?;
                let cfg = train_config(plan, search.trial_epochs, shuffle);
                let mut trainer = Trainer::new(&model, &cfg, self.data.train_x.rows())?;
                let mut metric = 0.0;
                for _ in 0..search.trial_epochs {
                    metric = trainer
                        .run_epoch(&mut model, self.data.train(), self.data.test())
                        .map_err(|e| fail(format!("trial for seed {seed}: {e}")))?;
                }
                if keep_best && best.as_ref().is_none_or(|(m, _, _)| metric > *m) {
                    best = Some((metric, model, trainer));
                }
                trials.push(Trial { seed, repeat, metric });
            }
        }
        let outcome = seed_select::finish::<String>(search, candidates, trials).map_err(|e| fail(e.to_string()))?;
        Ok((outcome, best.map(|(_, m, t)| (m, t))))
    }

    fn run_repetition(
        &self,
        plan: &ExperimentPlan,
        repetition: usize,
        plan_search: Option<&SeedSearchOutcome>,
        cache: &Option<Arc<SobolCache>>,
    ) -> Result<RepetitionRecord, HarnessError> {
        let seeds = repetition_seeds(plan, repetition);
        let mut record = RepetitionRecord {
            repetition,
            shuffle_seed: seeds.shuffle,
            pseudo_base_seed: seeds.pseudo_base,
            layer_sources: Vec::new(),
            nu: None,
            seed_search: None,
            status: RepetitionStatus::Complete,
            accuracies: Vec::new(),
        };
        let mut resumed = None;
        let start = match plan.arm {
            Arm::Prng => None,
            Arm::Qrng {
                seed: SeedPolicy::Fixed { nu },
            } => Some(nu),
            Arm::Qrng {
                seed: SeedPolicy::Auto { search, scope },
            } => match (scope, plan_search) {
                (SearchScope::PerPlan, Some(outcome)) => Some(outcome.nu),
                _ => {
                    let trial_seed = search_seed(plan, Some(repetition));
                    let (outcome, best) =
                        self.seed_search(plan, &search, trial_seed, seeds.pseudo_base, cache, search.warm_start)?;
                    let nu = outcome.nu;
                    record.seed_search = Some(outcome);
                    resumed = best;
                    Some(nu)
                }
            },
        };
        record.nu = start;
        let (mut model, tags) = self.build(plan, start, seeds.pseudo_base, cache)?;
        record.layer_sources = tags;
        let cfg = train_config(plan, plan.epochs, seeds.shuffle);
        let mut trainer = match resumed {
            Some((m, t)) => {
                model = m;
                t
            }
            None => Trainer::new(&model, &cfg, self.data.train_x.rows())?,
        };
        while trainer.epochs_done() < plan.epochs {
            match trainer.run_epoch(&mut model, self.data.train(), self.data.test()) {
                Ok(_) => {}
                Err(NnError::NumericalDivergence { epoch, batch, .. }) => {
                    record.status = RepetitionStatus::Diverged { epoch, batch };
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        record.accuracies = trainer.into_accuracies();
        record.accuracies.truncate(plan.epochs);
        Ok(record)
    }

    fn plan_search(&self, plan: &ExperimentPlan) -> Result<Option<SeedSearchOutcome>, HarnessError> {
        match plan.arm {
            Arm::Qrng {
                seed:
                    SeedPolicy::Auto {
                        search,
                        scope: SearchScope::PerPlan,
                    },
            } => {
                let cache = self.cache_for(plan)?;
                let pseudo_base = repetition_seeds(plan, 0).pseudo_base;
                let (outcome, _) = self.seed_search(plan, &search, search_seed(plan, None), pseudo_base, &cache, false)?;
                Ok(Some(outcome))
            }
            _ => Ok(None),
        }
    }

    /// Runs every repetition of every plan on the current rayon pool. Output
    /// order and contents do not depend on the number of workers.
    pub fn run_plans(&self, plans: &[ExperimentPlan]) -> Result<Vec<PlanRun>, HarnessError> {
        for plan in plans {
            self.check(plan)?;
        }
        let searches: Vec<Option<SeedSearchOutcome>> =
            plans.par_iter().map(|p| self.plan_search(p)).collect::<Result<_, _>>()?;
        let caches: Vec<Option<Arc<SobolCache>>> = plans.iter().map(|p| self.cache_for(p)).collect::<Result<_, _>>()?;
        let tasks: Vec<(usize, usize)> = plans
            .iter()
            .enumerate()
            .flat_map(|(i, p)| (0..p.repetitions).map(move |r| (i, r)))
            .collect();
        let records: Vec<RepetitionRecord> = tasks
            .par_iter()
            .map(|&(i, r)| self.run_repetition(&plans[i], r, searches[i].as_ref(), &caches[i]))
            .collect::<Result<_, _>>()?;
        let mut runs: Vec<PlanRun> = plans
            .iter()
            .zip(searches)
            .map(|(plan, plan_search)| PlanRun {
                plan: plan.clone(),
                hash: plan.hash(),
                plan_search,
                records: Vec::with_capacity(plan.repetitions),
            })
            .collect();
        for ((i, _), record) in tasks.into_iter().zip(records) {
            runs[i].records.push(record);
        }
        Ok(runs)
    }

    pub fn run_plan(&self, plan: &ExperimentPlan) -> Result<PlanRun, HarnessError> {
        Ok(self.run_plans(std::slice::from_ref(plan))?.remove(0))
    }

    /// Seed search alone, as run for repetition `repetition` of `plan`.
    pub fn search_only(
        &self,
        plan: &ExperimentPlan,
        search: &SeedSearchConfig,
        repetition: usize,
    ) -> Result<SeedSearchOutcome, HarnessError> {
        self.check(plan)?;
        let cache = self.cache_for(plan)?;
        let pseudo_base = repetition_seeds(plan, repetition).pseudo_base;
        let (outcome, _) = self.seed_search(plan, search, search_seed(plan, Some(repetition)), pseudo_base, &cache, false)?;
        Ok(outcome)
    }
}
