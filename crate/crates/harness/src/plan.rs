use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qrinit::data::PixelScaling;
use qrinit::initializers::InitializerSpec;
use qrinit::nn::{ModelConfig, OptimizerConfig};
use qrinit::seed_select::SeedSearchConfig;

use crate::error::HarnessError;

/// Version of the on-disk manifest, trace, and comparison formats.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelVariant {
    SingleLayer { units: usize },
    Mlp3232,
}

impl ModelVariant {
    pub fn config(&self, initializer: InitializerSpec) -> Result<ModelConfig, HarnessError> {
        match *self {
            Self::SingleLayer { units } => {
                ModelConfig::single_layer(units, initializer).map_err(|e| HarnessError::InvalidPlan(e.to_string()))
            }
            Self::Mlp3232 => Ok(ModelConfig::mlp_32_32(initializer)),
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingleLayer { units } => write!(f, "single-{units}"),
            Self::Mlp3232 => f.write_str("mlp-32-32"),
        }
    }
}

impl FromStr for ModelVariant {
    type Err = HarnessError;

    /// `mlp-32-32` or `single-<units>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mlp-32-32" {
            return Ok(Self::Mlp3232);
        }
        s.strip_prefix("single-")
            .and_then(|u| u.parse().ok())
            .map(|units| Self::SingleLayer { units })
            .ok_or_else(|| HarnessError::InvalidPlan(format!("unknown model `{s}`; use mlp-32-32 or single-<units>")))
    }
}

/// Whether the seed search runs once for the whole plan or once per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScope {
    #[default]
    PerRepetition,
    PerPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SeedPolicy {
    Fixed { nu: usize },
    Auto { search: SeedSearchConfig, scope: SearchScope },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arm", rename_all = "snake_case")]
pub enum Arm {
    Prng,
    Qrng { seed: SeedPolicy },
}

impl Arm {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Prng => "prng",
            Self::Qrng { .. } => "qrng",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: String,
    pub model: ModelVariant,
    pub optimizer: OptimizerConfig,
    pub initializer: InitializerSpec,
    pub arm: Arm,
    pub repetitions: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub master_seed: u64,
    pub pixel_scaling: PixelScaling,
    /// Serve Sobol' draws from a precomputed table. Results are unaffected.
    #[serde(default)]
    pub sobol_cache: bool,
}

impl ExperimentPlan {
    /// MNIST, 30 epochs, batch 64, raw pixel intensities.
    pub fn new(model: ModelVariant, optimizer: OptimizerConfig, initializer: InitializerSpec, arm: Arm) -> Self {
        Self {
            dataset: "mnist".to_string(),
            model,
            optimizer,
            initializer,
            arm,
            repetitions: 100,
            epochs: 30,
            batch_size: 64,
            master_seed: 0,
            pixel_scaling: PixelScaling::Raw,
            sobol_cache: false,
        }
    }

    /// The same plan with the other source arm.
    pub fn with_arm(&self, arm: Arm) -> Self {
        Self { arm, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(HarnessError::InvalidPlan(
                "repetitions, epochs and batch size must be at least 1".into(),
            ));
        }
        if self.dataset != "mnist" {
            return Err(HarnessError::InvalidPlan(format!("unsupported dataset `{}`", self.dataset)));
        }
        self.model.config(self.initializer)?;
        match self.arm {
            Arm::Qrng {
                seed: SeedPolicy::Fixed { nu: 0 },
            } => Err(HarnessError::InvalidPlan("nu must be at least 1".into())),
            Arm::Qrng {
                seed: SeedPolicy::Auto { search, .. },
            } => search
                .validate::<String>()
                .map_err(|e| HarnessError::InvalidPlan(e.to_string())),
            _ => Ok(()),
        }
    }

    /// Epochs charged to this arm for seed search.
    pub fn delta(&self) -> usize {
        match self.arm {
            Arm::Qrng {
                seed: SeedPolicy::Auto { search, .. },
            } => search.delta_q(),
            _ => 0,
        }
    }

    /// Hex digest identifying the plan. The cache flag is excluded because it
    /// does not change results.
    pub fn hash(&self) -> String {
        let canonical = Self {
            sobol_cache: false,
            ..self.clone()
        };
        short_digest(&serde_json::to_vec(&canonical).expect("plan serializes"))
    }

    pub fn describe(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.dataset,
            self.model,
            self.optimizer.name(),
            self.initializer,
            self.arm.label()
        )
    }
}

pub fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}
