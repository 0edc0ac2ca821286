//! MNIST ingestion from IDX files.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::SparseRows;

const MAGIC_LABELS: u32 = 0x0000_0801;
const MAGIC_IMAGES: u32 = 0x0000_0803;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unsupported IDX magic {0:#010x}")]
    BadMagic(u32),
    #[error("IDX data is truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("IDX shape {0:?} overflows the addressable size")]
    ShapeOverflow(Vec<u64>),
    #[error("IDX data has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("label {label} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("{0}")]
    Inconsistent(String),
    #[error("dataset file not found: {0}")]
    DatasetMissing(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Unsigned-byte tensor from an IDX container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an image (`0x00000803`, rank 3) or label (`0x00000801`, rank 1) IDX buffer.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, DataError> {
    if bytes.len() < 4 {
        return Err(DataError::TruncatedFile {
            expected: 4,
            found: bytes.len(),
        });
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let rank = match magic {
        MAGIC_LABELS => 1,
        MAGIC_IMAGES => 3,
        other => return Err(DataError::BadMagic(other)),
    };
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(DataError::TruncatedFile {
            expected: header,
            found: bytes.len(),
        });
    }
    let raw_dims: Vec<u64> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")) as u64)
        .collect();
    let count = raw_dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
        .and_then(|c| c.checked_add(header))
        .ok_or_else(|| DataError::ShapeOverflow(raw_dims.clone()))?;
    if bytes.len() < count {
        return Err(DataError::TruncatedFile {
            expected: count,
            found: bytes.len(),
        });
    }
    if bytes.len() > count {
        return Err(DataError::TrailingBytes(bytes.len() - count));
    }
    Ok(IdxTensor {
        dims: raw_dims.iter().map(|&d| d as usize).collect(),
        data: bytes[header..].to_vec(),
    })
}

/// Reads an IDX file, decompressing it when the name ends in `.gz`.
pub fn read_idx_file(path: &Path) -> Result<IdxTensor, DataError> {
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    if !path.exists() {
        return Err(DataError::DatasetMissing(path.display().to_string()));
    }
    let raw = std::fs::read(path).map_err(io)?;
    let bytes = if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io)?;
        out
    } else {
        raw
    };
    parse_idx(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelScaling {
    /// Divide by 255 so pixels lie in `[0, 1]`.
    #[default]
    UnitInterval,
    /// Keep the original `0..=255` intensities.
    Raw,
}

impl PixelScaling {
    fn factor(self) -> f32 {
        match self {
            Self::UnitInterval => 1.0 / 255.0,
            Self::Raw => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMnist {
    pub train_images: IdxTensor,
    pub train_labels: IdxTensor,
    pub test_images: IdxTensor,
    pub test_labels: IdxTensor,
}

/// One partition: flattened features, one-hot targets, and class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub features: usize,
    /// `rows x features`, row-major.
    pub x: Vec<f32>,
    /// `rows x 10`, row-major one-hot.
    pub y: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Partition {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn sparse(&self) -> SparseRows<f32> {
        SparseRows::from_dense(&self.x, self.features)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Partition,
    pub test: Partition,
    pub scaling: PixelScaling,
}

pub const CLASSES: usize = 10;

fn partition(images: &IdxTensor, labels: &IdxTensor, scaling: PixelScaling) -> Result<Partition, DataError> {
    if images.dims.len() != 3 || labels.dims.len() != 1 {
        return Err(DataError::Inconsistent("expected rank-3 images and rank-1 labels".into()));
    }
    let rows = images.dims[0];
    if labels.dims[0] != rows {
        return Err(DataError::Inconsistent(format!(
            "{rows} images but {} labels",
            labels.dims[0]
        )));
    }
    let features = images.dims[1] * images.dims[2];
    let factor = scaling.factor();
    let x = images.data.iter().map(|&p| p as f32 * factor).collect();
    let mut y = vec![0.0f32; rows * CLASSES];
    for (index, &label) in labels.data.iter().enumerate() {
        if label as usize >= CLASSES {
            return Err(DataError::LabelOutOfRange { index, label });
        }
        y[index * CLASSES + label as usize] = 1.0;
    }
    Ok(Partition {
        features,
        x,
        y,
        labels: labels.data.clone(),
    })
}

/// Flattens images, scales pixels, and one-hot encodes labels, keeping file order.
pub fn prepare(raw: &RawMnist, scaling: PixelScaling) -> Result<Dataset, DataError> {
    Ok(Dataset {
        train: partition(&raw.train_images, &raw.train_labels, scaling)?,
        test: partition(&raw.test_images, &raw.test_labels, scaling)?,
        scaling,
    })
}

/// Paths of the four MNIST files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

const STANDARD_NAMES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

impl MnistFiles {
    /// Finds the standard file names in `dir`, accepting `.gz` and the
    /// `train-images.idx3-ubyte` spelling.
    pub fn locate(dir: &Path) -> Result<Self, DataError> {
        let find = |name: &str| -> Result<PathBuf, DataError> {
            let dotted = name.replacen("-idx", ".idx", 1);
            for candidate in [name.to_string(), format!("{name}.gz"), dotted.clone(), format!("{dotted}.gz")] {
                let p = dir.join(&candidate);
                if p.is_file() {
                    return Ok(p);
                }
            }
            Err(DataError::DatasetMissing(dir.join(name).display().to_string()))
        };
        Ok(Self {
            train_images: find(STANDARD_NAMES[0])?,
            train_labels: find(STANDARD_NAMES[1])?,
            test_images: find(STANDARD_NAMES[2])?,
            test_labels: find(STANDARD_NAMES[3])?,
        })
    }

    pub fn read(&self) -> Result<RawMnist, DataError> {
        Ok(RawMnist {
            train_images: read_idx_file(&self.train_images)?,
            train_labels: read_idx_file(&self.train_labels)?,
            test_images: read_idx_file(&self.test_images)?,
            test_labels: read_idx_file(&self.test_labels)?,
        })
    }
}

pub fn load_mnist(dir: &Path, scaling: PixelScaling) -> Result<Dataset, DataError> {
    prepare(&MnistFiles::locate(dir)?.read()?, scaling)
}
