//! Uniform, normal, and ±2σ truncated-normal variates by inverse transform,
//! from either a Sobol' dimension or an MT19937 stream.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mt19937::Mt19937;
use crate::normal::{self, CDF_MINUS_TWO, CDF_TWO_SIDED_MASS};
use crate::sobol::{DirectionNumberTable, SobolCache, SobolEngine, SobolError};

/// Pseudorandom base draws are kept inside `[2^-33, 1 - 2^-33]` before Φ⁻¹.
pub const PSEUDO_CLAMP: f64 = 1.0 / 8_589_934_592.0;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("uniform bounds must satisfy a < b, got a={a}, b={b}")]
    InvalidBounds { a: f64, b: f64 },
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("mean must be finite, got {0}")]
    InvalidMean(f64),
    #[error(transparent)]
    Sobol(#[from] SobolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
    /// Normal restricted to `[mu - 2 sigma, mu + 2 sigma]`.
    TruncatedNormal { mu: f64, sigma: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), SamplerError> {
        match *self {
            Self::Uniform { a, b } => {
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(SamplerError::InvalidBounds { a, b })
                }
            }
            Self::Normal { mu, sigma } | Self::TruncatedNormal { mu, sigma } => {
                if !mu.is_finite() {
                    Err(SamplerError::InvalidMean(mu))
                } else if sigma.is_finite() && sigma > 0.0 {
                    Ok(())
                } else {
                    Err(SamplerError::InvalidSigma(sigma))
                }
            }
        }
    }

    /// Maps one base draw `u` through the inverse CDF.
    pub fn from_base(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform { a, b } => uniform_from_base(u, a, b),
            Self::Normal { mu, sigma } => normal_from_base(u, mu, sigma),
            Self::TruncatedNormal { mu, sigma } => truncated_normal_from_base(u, mu, sigma),
        }
    }
}

pub fn uniform_from_base(u: f64, a: f64, b: f64) -> f64 {
    (b - a) * u + a
}

fn clamp_base(u: f64) -> f64 {
    u.clamp(PSEUDO_CLAMP, 1.0 - PSEUDO_CLAMP)
}

pub fn normal_from_base(u: f64, mu: f64, sigma: f64) -> f64 {
    let z = normal::inverse_cdf(clamp_base(u)).expect("clamped base draw is inside (0, 1)");
    z * sigma + mu
}

pub fn truncated_normal_from_base(u: f64, mu: f64, sigma: f64) -> f64 {
    let gamma = CDF_MINUS_TWO + clamp_base(u) * CDF_TWO_SIDED_MASS;
    let z = normal::inverse_cdf(gamma).expect("gamma is inside (0, 1)");
    z * sigma + mu
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SourceTag {
    Quasi { dimension: usize },
    Pseudo { seed: u32 },
}

/// Base-draw stream in `(0, 1)` (quasi) or `[0, 1)` (pseudo).
#[derive(Debug, Clone)]
pub enum RandomSource {
    Quasi {
        engine: SobolEngine,
        dimension: usize,
    },
    Pseudo {
        rng: Mt19937,
        draws: u64,
    },
}

impl RandomSource {
    /// A quasirandom source positioned at the head of `dimension`.
    pub fn quasi(table: Arc<DirectionNumberTable>, dimension: usize) -> Result<Self, SamplerError> {
        let engine = SobolEngine::new(table, dimension)?;
        Ok(Self::Quasi { engine, dimension })
    }

    /// Like [`RandomSource::quasi`], serving draws from a shared cache where it covers them.
    pub fn quasi_cached(
        table: Arc<DirectionNumberTable>,
        dimension: usize,
        cache: Arc<SobolCache>,
    ) -> Result<Self, SamplerError> {
        let mut engine = SobolEngine::new(table, dimension.max(cache.dimensions()))?;
        engine.attach_cache(cache)?;
        Ok(Self::Quasi { engine, dimension })
    }

    pub fn pseudo(seed: u32) -> Self {
        Self::Pseudo {
            rng: Mt19937::new(seed),
            draws: 0,
        }
    }

    pub fn tag(&self) -> SourceTag {
        match self {
            Self::Quasi { dimension, .. } => SourceTag::Quasi {
                dimension: *dimension,
            },
            Self::Pseudo { rng, .. } => SourceTag::Pseudo { seed: rng.seed() },
        }
    }

    pub fn draws_emitted(&self) -> u64 {
        match self {
            Self::Quasi { engine, dimension } => engine.position(*dimension).unwrap_or(0),
            Self::Pseudo { draws, .. } => *draws,
        }
    }

    /// Next `n` base draws.
    pub fn next_base(&mut self, n: usize) -> Result<Vec<f64>, SamplerError> {
        match self {
            Self::Quasi { engine, dimension } => Ok(engine.draw(*dimension, n)?),
            Self::Pseudo { rng, draws } => {
                *draws += n as u64;
                Ok((0..n).map(|_| rng.next_f64()).collect())
            }
        }
    }
}

pub fn sample(src: &mut RandomSource, spec: &DistributionSpec, n: usize) -> Result<Vec<f64>, SamplerError> {
    spec.validate()?;
    let mut values = src.next_base(n)?;
    for v in &mut values {
        *v = spec.from_base(*v);
    }
    Ok(values)
}

pub fn sample_uniform(src: &mut RandomSource, a: f64, b: f64, n: usize) -> Result<Vec<f64>, SamplerError> {
    sample(src, &DistributionSpec::Uniform { a, b }, n)
}

pub fn sample_normal(src: &mut RandomSource, mu: f64, sigma: f64, n: usize) -> Result<Vec<f64>, SamplerError> {
    sample(src, &DistributionSpec::Normal { mu, sigma }, n)
}

pub fn sample_truncated_normal(
    src: &mut RandomSource,
    mu: f64,
    sigma: f64,
    n: usize,
) -> Result<Vec<f64>, SamplerError> {
    sample(src, &DistributionSpec::TruncatedNormal { mu, sigma }, n)
}

/// One-dimensional star discrepancy of a point set in `[0, 1)`.
pub fn star_discrepancy(points: &[f64]) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let worst = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2.0 * i as f64 + 1.0) / (2.0 * n)).abs())
        .fold(0.0, f64::max);
    1.0 / (2.0 * n) + worst
}
