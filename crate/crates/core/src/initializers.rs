//! The ten weight initializers, their shape-derived parameters, and the
//! QR-based orthogonal construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::householder_qr;
use crate::samplers::{self, DistributionSpec, RandomSource, SamplerError, SourceTag};
use crate::sobol::MAX_DIMENSION;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("tensor shape must have at least one dimension, all positive; got {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("orthogonal initialization needs rank >= 2, got shape {0:?}")]
    RankTooLow(Vec<usize>),
    #[error("layers starting at dimension {start} with {count} layers exceed the limit of {max}")]
    DimensionBudgetExceeded { start: usize, count: usize, max: usize },
    #[error("unknown initializer `{0}`")]
    UnknownInitializer(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self, InitError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(InitError::InvalidShape(dims));
        }
        Ok(Self { dims })
    }

    pub fn matrix(rows: usize, cols: usize) -> Result<Self, InitError> {
        Self::new(vec![rows, cols])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn receptive_field(&self) -> usize {
        self.dims[..self.dims.len().saturating_sub(2)].iter().product()
    }

    /// Rank 1 uses the single extent for both fans.
    pub fn fan_in(&self) -> usize {
        match self.rank() {
            1 => self.dims[0],
            r => self.receptive_field() * self.dims[r - 2],
        }
    }

    pub fn fan_out(&self) -> usize {
        match self.rank() {
            1 => self.dims[0],
            r => self.receptive_field() * self.dims[r - 1],
        }
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ShapeAgnostic,
    ShapeDependent,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitializerSpec {
    GlorotUniform,
    GlorotNormal,
    HeUniform,
    HeNormal,
    LecunUniform,
    LecunNormal,
    Orthogonal { gain: f64 },
    RandomUniform { a: f64, b: f64 },
    RandomNormal { mu: f64, sigma: f64 },
    TruncatedNormal { mu: f64, sigma: f64 },
}

pub const INITIALIZER_NAMES: [&str; 10] = [
    "glorot_uniform",
    "glorot_normal",
    "he_uniform",
    "he_normal",
    "lecun_uniform",
    "lecun_normal",
    "orthogonal",
    "random_uniform",
    "random_normal",
    "truncated_normal",
];

impl InitializerSpec {
    pub const fn orthogonal() -> Self {
        Self::Orthogonal { gain: 1.0 }
    }

    pub const fn random_uniform() -> Self {
        Self::RandomUniform { a: -0.05, b: 0.05 }
    }

    pub const fn random_normal() -> Self {
        Self::RandomNormal { mu: 0.0, sigma: 0.05 }
    }

    pub const fn truncated_normal() -> Self {
        Self::TruncatedNormal { mu: 0.0, sigma: 0.05 }
    }

    /// All ten kinds with default parameters, in canonical order.
    pub fn all() -> [Self; 10] {
        [
            Self::GlorotUniform,
            Self::GlorotNormal,
            Self::HeUniform,
            Self::HeNormal,
            Self::LecunUniform,
            Self::LecunNormal,
            Self::orthogonal(),
            Self::random_uniform(),
            Self::random_normal(),
            Self::truncated_normal(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GlorotUniform => "glorot_uniform",
            Self::GlorotNormal => "glorot_normal",
            Self::HeUniform => "he_uniform",
            Self::HeNormal => "he_normal",
            Self::LecunUniform => "lecun_uniform",
            Self::LecunNormal => "lecun_normal",
            Self::Orthogonal { .. } => "orthogonal",
            Self::RandomUniform { .. } => "random_uniform",
            Self::RandomNormal { .. } => "random_normal",
            Self::TruncatedNormal { .. } => "truncated_normal",
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Self::GlorotUniform
            | Self::GlorotNormal
            | Self::HeUniform
            | Self::HeNormal
            | Self::LecunUniform
            | Self::LecunNormal => Category::ShapeDependent,
            Self::Orthogonal { .. } => Category::Orthogonal,
            Self::RandomUniform { .. } | Self::RandomNormal { .. } | Self::TruncatedNormal { .. } => {
                Category::ShapeAgnostic
            }
        }
    }
}

impl FromStr for InitializerSpec {
    type Err = InitError;

    /// Parses a kind name into its default-parameter spec.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::all()
            .into_iter()
            .find(|spec| spec.name() == s)
            .ok_or_else(|| InitError::UnknownInitializer(s.to_string()))
    }
}

impl fmt::Display for InitializerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Distribution the base draws are pushed through for `spec` on `shape`.
pub fn resolve_params(spec: &InitializerSpec, shape: &TensorShape) -> DistributionSpec {
    let n_in = shape.fan_in() as f64;
    let n_out = shape.fan_out() as f64;
    let symmetric = |bound: f64| DistributionSpec::Uniform { a: -bound, b: bound };
    let truncated = |sigma: f64| DistributionSpec::TruncatedNormal { mu: 0.0, sigma };
    match *spec {
        InitializerSpec::GlorotUniform => symmetric((6.0 / (n_in + n_out)).sqrt()),
        InitializerSpec::GlorotNormal => truncated((2.0 / (n_in + n_out)).sqrt()),
        InitializerSpec::HeUniform => symmetric((6.0 / n_in).sqrt()),
        InitializerSpec::HeNormal => truncated((2.0 / n_in).sqrt()),
        InitializerSpec::LecunUniform => symmetric((3.0 / n_in).sqrt()),
        InitializerSpec::LecunNormal => truncated((1.0 / n_in).sqrt()),
        InitializerSpec::Orthogonal { .. } => DistributionSpec::Normal { mu: 0.0, sigma: 1.0 },
        InitializerSpec::RandomUniform { a, b } => DistributionSpec::Uniform { a, b },
        InitializerSpec::RandomNormal { mu, sigma } => DistributionSpec::Normal { mu, sigma },
        InitializerSpec::TruncatedNormal { mu, sigma } => DistributionSpec::TruncatedNormal { mu, sigma },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    pub shape: TensorShape,
    /// Row-major.
    pub values: Vec<f64>,
    pub source: SourceTag,
}

/// Fills a tensor of `shape` from `src`, which should be fresh for this tensor.
pub fn initialize(
    spec: &InitializerSpec,
    shape: &TensorShape,
    src: &mut RandomSource,
) -> Result<WeightTensor, InitError> {
    if let InitializerSpec::Orthogonal { gain } = *spec {
        return orthogonal_init(shape, gain, src);
    }
    let dist = resolve_params(spec, shape);
    let values = samplers::sample(src, &dist, shape.len())?;
    Ok(WeightTensor {
        shape: shape.clone(),
        values,
        source: src.tag(),
    })
}

/// Orthogonal matrix (or stack flattened to one) scaled by `gain`. The normal
/// draws fill a `max(rows, cols) x min(rows, cols)` matrix row-major, whose QR
/// factor is sign-corrected by `diag(R)` and transposed back when `rows < cols`.
pub fn orthogonal_init(shape: &TensorShape, gain: f64, src: &mut RandomSource) -> Result<WeightTensor, InitError> {
    if shape.rank() < 2 {
        return Err(InitError::RankTooLow(shape.dims().to_vec()));
    }
    let cols = shape.dims()[shape.rank() - 1];
    let rows = shape.len() / cols;
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let draws = samplers::sample_normal(src, 0.0, 1.0, tall * short)?;
    let (mut q, r) = householder_qr(&draws, tall, short);
    for j in 0..short {
        if r[j * short + j] < 0.0 {
            for i in 0..tall {
                q[i * short + j] = -q[i * short + j];
            }
        }
    }
    let mut values = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[i * cols + j] } else { q[j * short + i] };
            values[i * cols + j] = gain * v;
        }
    }
    Ok(WeightTensor {
        shape: shape.clone(),
        values,
        source: src.tag(),
    })
}

/// Consecutive Sobol' dimensions for `count` layers starting at `start`.
pub fn assign_layer_seeds(start: usize, count: usize) -> Result<Vec<usize>, InitError> {
    let exceeded = InitError::DimensionBudgetExceeded {
        start,
        count,
        max: MAX_DIMENSION,
    };
    if start == 0 {
        return Err(exceeded);
    }
    match (start + count).checked_sub(1) {
        Some(last) if last <= MAX_DIMENSION => Ok((start..start + count).collect()),
        _ => Err(exceeded),
    }
}

/// Consecutive MT19937 seeds for `count` layers starting at `base`.
pub fn pseudo_layer_seeds(base: u32, count: usize) -> Vec<u32> {
    (0..count as u32).map(|i| base.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sobol::DirectionNumberTable;

    fn quasi(k: usize) -> RandomSource {
        RandomSource::quasi(Arc::new(DirectionNumberTable::bundled()), k).unwrap()
    }

    fn gram_of_shorter_side(w: &WeightTensor) -> (usize, Vec<f64>) {
        let cols = *w.shape.dims().last().unwrap();
        let rows = w.values.len() / cols;
        let at = |i: usize, j: usize| w.values[i * cols + j];
        if rows >= cols {
            let mut g = vec![0.0; cols * cols];
            for a in 0..cols {
                for b in 0..cols {
                    g[a * cols + b] = (0..rows).map(|i| at(i, a) * at(i, b)).sum();
                }
            }
            (cols, g)
        } else {
            let mut g = vec![0.0; rows * rows];
            for a in 0..rows {
                for b in 0..rows {
                    g[a * rows + b] = (0..cols).map(|j| at(a, j) * at(b, j)).sum();
                }
            }
            (rows, g)
        }
    }

    fn assert_scaled_identity(w: &WeightTensor, scale: f64, tol: f64) {
        let (n, g) = gram_of_shorter_side(w);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { scale } else { 0.0 };
                assert!((g[i * n + j] - want).abs() < tol, "gram[{i},{j}] = {}", g[i * n + j]);
            }
        }
    }

    #[test]
    fn fans() {
        let m = TensorShape::matrix(784, 32).unwrap();
        assert_eq!((m.fan_in(), m.fan_out()), (784, 32));
        let conv = TensorShape::new(vec![3, 3, 16, 32]).unwrap();
        assert_eq!((conv.fan_in(), conv.fan_out()), (144, 288));
        let v = TensorShape::new(vec![7]).unwrap();
        assert_eq!((v.fan_in(), v.fan_out()), (7, 7));
        assert!(TensorShape::new(vec![]).is_err());
        assert!(TensorShape::new(vec![3, 0]).is_err());
    }

    #[test]
    fn table_parameters() {
        let shape = TensorShape::matrix(784, 32).unwrap();
        let b = (6.0f64 / 816.0).sqrt();
        assert_eq!(
            resolve_params(&InitializerSpec::GlorotUniform, &shape),
            DistributionSpec::Uniform { a: -b, b }
        );
        assert!((b - 0.08575).abs() < 1e-5);
        let square = TensorShape::matrix(32, 32).unwrap();
        assert_eq!(
            resolve_params(&InitializerSpec::HeNormal, &square),
            DistributionSpec::TruncatedNormal { mu: 0.0, sigma: 0.25 }
        );
        assert_eq!(
            resolve_params(&InitializerSpec::random_uniform(), &shape),
            DistributionSpec::Uniform { a: -0.05, b: 0.05 }
        );
        assert_eq!(
            resolve_params(&InitializerSpec::orthogonal(), &shape),
            DistributionSpec::Normal { mu: 0.0, sigma: 1.0 }
        );
    }

    #[test]
    fn names_round_trip() {
        for (spec, name) in InitializerSpec::all().iter().zip(INITIALIZER_NAMES) {
            assert_eq!(spec.name(), name);
            assert_eq!(name.parse::<InitializerSpec>().unwrap(), *spec);
        }
        assert!("xavier".parse::<InitializerSpec>().is_err());
    }

    #[test]
    fn serde_uses_stable_names() {
        let json = serde_json::to_string(&InitializerSpec::HeNormal).unwrap();
        assert_eq!(json, r#"{"kind":"he_normal"}"#);
        let back: InitializerSpec = serde_json::from_str(r#"{"kind":"orthogonal","gain":2.0}"#).unwrap();
        assert_eq!(back, InitializerSpec::Orthogonal { gain: 2.0 });
    }

    #[test]
    fn categories_partition_six_three_one() {
        let count = |c| InitializerSpec::all().iter().filter(|s| s.category() == c).count();
        assert_eq!(count(Category::ShapeDependent), 6);
        assert_eq!(count(Category::ShapeAgnostic), 3);
        assert_eq!(count(Category::Orthogonal), 1);
    }

    #[test]
    fn random_uniform_from_first_dimension() {
        let shape = TensorShape::matrix(2, 2).unwrap();
        let w = initialize(&InitializerSpec::random_uniform(), &shape, &mut quasi(1)).unwrap();
        let want = [0.0, 0.025, -0.025, -0.0125];
        for (x, y) in w.values.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(w.source, SourceTag::Quasi { dimension: 1 });
    }

    #[test]
    fn truncated_normal_head_is_zero() {
        let shape = TensorShape::matrix(1, 1).unwrap();
        let w = initialize(&InitializerSpec::truncated_normal(), &shape, &mut quasi(1)).unwrap();
        assert_eq!(w.values, vec![0.0]);
    }

    #[test]
    fn orthogonal_shapes() {
        let sq = TensorShape::matrix(3, 3).unwrap();
        assert_scaled_identity(&initialize(&InitializerSpec::orthogonal(), &sq, &mut quasi(2)).unwrap(), 1.0, 1e-6);
        let tall = TensorShape::matrix(4, 2).unwrap();
        assert_scaled_identity(&orthogonal_init(&tall, 1.0, &mut quasi(2)).unwrap(), 1.0, 1e-6);
        let wide = TensorShape::matrix(2, 4).unwrap();
        assert_scaled_identity(&orthogonal_init(&wide, 1.0, &mut RandomSource::pseudo(4)).unwrap(), 1.0, 1e-6);
        let gained = orthogonal_init(&sq, 2.0, &mut quasi(3)).unwrap();
        assert_scaled_identity(&gained, 4.0, 1e-5);
        let rank1 = TensorShape::new(vec![5]).unwrap();
        assert!(matches!(
            orthogonal_init(&rank1, 1.0, &mut quasi(1)),
            Err(InitError::RankTooLow(_))
        ));
    }

    #[test]
    fn orthogonal_positive_diagonal_convention() {
        // With the sign correction, Q^T A = R has a non-negative diagonal.
        let shape = TensorShape::matrix(5, 3).unwrap();
        let w = orthogonal_init(&shape, 1.0, &mut RandomSource::pseudo(11)).unwrap();
        let a = samplers::sample_normal(&mut RandomSource::pseudo(11), 0.0, 1.0, 15).unwrap();
        for j in 0..3 {
            let d: f64 = (0..5).map(|i| w.values[i * 3 + j] * a[i * 3 + j]).sum();
            assert!(d > 0.0);
        }
    }

    #[test]
    fn layer_dimensions() {
        assert_eq!(assign_layer_seeds(1, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(assign_layer_seeds(21199, 2).unwrap(), vec![21199, 21200]);
        assert!(matches!(
            assign_layer_seeds(21200, 2),
            Err(InitError::DimensionBudgetExceeded { .. })
        ));
        assert!(assign_layer_seeds(0, 1).is_err());
        assert_eq!(pseudo_layer_seeds(u32::MAX, 2), vec![u32::MAX, 0]);
    }
}
