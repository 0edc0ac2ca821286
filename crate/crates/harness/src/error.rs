use serde::Serialize;
use thiserror::Error;

use qrinit::data::DataError;
use qrinit::initializers::InitError;
use qrinit::nn::NnError;
use qrinit::samplers::SamplerError;
use qrinit::sobol::SobolError;
use qrinit::stats::StatsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset missing: {0}")]
    DatasetMissing(String),
    #[error(transparent)]
    Data(DataError),
    #[error(transparent)]
    Sobol(#[from] SobolError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Training(#[from] NnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("seed search failed: {0}")]
    SeedSearch(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<DataError> for HarnessError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::DatasetMissing(p) => Self::DatasetMissing(p),
            other => Self::Data(other),
        }
    }
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.as_ref().display().to_string();
        move |source| Self::Io { path, source }
    }

    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DatasetMissing(_) => "DatasetMissing",
            Self::Data(_) => "DataError",
            Self::Sobol(_) => "SobolError",
            Self::Sampler(_) => "SamplerError",
            Self::Init(_) => "InitError",
            Self::Training(NnError::NumericalDivergence { .. }) => "NumericalDivergence",
            Self::Training(_) => "TrainingError",
            Self::Stats(StatsError::MetadataMismatch(_)) | Self::MetadataMismatch(_) => "MetadataMismatch",
            Self::Stats(_) => "StatsError",
            Self::SeedSearch(_) => "SeedSearchError",
            Self::InvalidPlan(_) => "InvalidPlan",
            Self::Format { .. } => "FormatError",
            Self::Io { .. } => "IoError",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: ErrorBody {
                kind: self.kind().to_string(),
                message: self.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}
