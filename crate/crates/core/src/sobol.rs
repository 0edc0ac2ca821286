//! Sobol' low-discrepancy sequences built from Joe–Kuo direction numbers.
//!
//! Each dimension `k` is an independent stream in `(0, 1)`. The recursion is
//! carried in 32-bit fixed point (`x / 2^32`) and enumerated in Gray-code order,
//! so every draw costs one XOR per generated coordinate. The all-zero first
//! point is never emitted.
//!
//! An uncached [`SobolEngine`] produces dimension `k` the way a joint
//! `k`-dimensional generator does: all coordinates `1..=k` are advanced and the
//! first `k - 1` are discarded, which makes a draw cost `O(k * n)`. A
//! [`SobolCache`] precomputes an `n_max x d` table once (`O(d * n_max)`) and
//! serves later draws from memory.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

/// Highest dimension the direction-number table may describe.
pub const MAX_DIMENSION: usize = 21_200;

/// Default memory ceiling for [`SobolCache`] tables.
pub const DEFAULT_CACHE_BUDGET_BYTES: usize = 256 * 1024 * 1024;

const BITS: usize = 32;
const TO_UNIT: f64 = 1.0 / 4_294_967_296.0;
// Gray-code stepping from point index i uses v[trailing_ones(i)], so the last
// reachable point is 2^32 - 1.
const MAX_POINT_INDEX: u64 = u32::MAX as u64;

static BUNDLED_TABLE: &str = include_str!("../data/new-joe-kuo-6.1024");

#[derive(Debug, Error)]
pub enum SobolError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: dimension {dimension} has m_{index} = {value}; it must be odd and below 2^{index}")]
    InvalidM {
        line: usize,
        dimension: usize,
        index: usize,
        value: u64,
    },
    #[error("line {line}: expected dimension {expected}, found {found}")]
    NonContiguousDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension {dimension} is outside 1..={max}")]
    DimensionOutOfRange { dimension: usize, max: usize },
    #[error("cache of {n_max} x {dimensions} values needs {bytes} bytes, budget is {budget}")]
    CacheTooLarge {
        n_max: usize,
        dimensions: usize,
        bytes: usize,
        budget: usize,
    },
    #[error("dimension {dimension} cannot emit more than 2^32 - 1 draws")]
    SequenceExhausted { dimension: usize },
    #[error("reading direction file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One row of a Joe–Kuo file: `d s a m_1 ... m_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionRecord {
    pub dimension: usize,
    pub degree: u32,
    /// Interior coefficients of the primitive polynomial, most significant first.
    pub coefficients: u64,
    pub initial_m: Vec<u64>,
}

/// Parsed and validated direction numbers, plus the derived 32-bit direction
/// integers for every dimension (dimension 1 is the van der Corput sequence).
#[derive(Clone)]
pub struct DirectionNumberTable {
    records: Vec<DirectionRecord>,
    directions: Vec<[u32; BITS]>,
}

impl fmt::Debug for DirectionNumberTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirectionNumberTable")
            .field("max_dimension", &self.max_dimension())
            .finish()
    }
}

impl DirectionNumberTable {
    /// Parses the whitespace-delimited Joe–Kuo format. The first non-empty
    /// line is a header. Rows beyond [`MAX_DIMENSION`] are ignored.
    pub fn parse(text: &str) -> Result<Self, SobolError> {
        let mut records = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let record = parse_row(trimmed, line_no)?;
            let expected = records.len() + 2;
            if record.dimension != expected {
                return Err(SobolError::NonContiguousDimension {
                    line: line_no,
                    expected,
                    found: record.dimension,
                });
            }
            if record.dimension > MAX_DIMENSION {
                break;
            }
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SobolError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SobolError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The first 1024 dimensions, compiled into the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled direction table is valid")
    }

    fn from_records(records: Vec<DirectionRecord>) -> Self {
        let mut directions = Vec::with_capacity(records.len() + 1);
        let mut first = [0u32; BITS];
        for (j, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - j);
        }
        directions.push(first);
        directions.extend(records.iter().map(direction_integers));
        Self {
            records,
            directions,
        }
    }

    pub fn records(&self) -> &[DirectionRecord] {
        &self.records
    }

    pub fn max_dimension(&self) -> usize {
        self.records.len() + 1
    }

    /// Direction integers `v_1 ..= v_32` of dimension `k`, scaled to 32 bits.
    pub fn directions(&self, dimension: usize) -> Result<&[u32; BITS], SobolError> {
        self.check_dimension(dimension)?;
        Ok(&self.directions[dimension - 1])
    }

    fn check_dimension(&self, dimension: usize) -> Result<(), SobolError> {
        if dimension == 0 || dimension > self.max_dimension() {
            return Err(SobolError::DimensionOutOfRange {
                dimension,
                max: self.max_dimension(),
            });
        }
        Ok(())
    }

    /// Integer value of point `index` (0-based, point 0 is zero) in Gray-code order.
    fn point(&self, dimension: usize, index: u64) -> u32 {
        let v = &self.directions[dimension - 1];
        let mut gray = index ^ (index >> 1);
        let mut x = 0u32;
        let mut bit = 0;
        while gray != 0 {
            if gray & 1 == 1 {
                x ^= v[bit];
            }
            gray >>= 1;
            bit += 1;
        }
        x
    }

    /// Coordinate `dimension` of points `start + 1 ..= start + n`, generated jointly
    /// with every lower dimension.
    fn joint_column(&self, dimension: usize, start: u64, n: usize) -> Vec<u32> {
        let mut state: Vec<u32> = (1..=dimension).map(|d| self.point(d, start)).collect();
        let mut out = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let bit = (start + i).trailing_ones() as usize;
            for (x, v) in state.iter_mut().zip(&self.directions) {
                *x ^= v[bit];
            }
            out.push(state[dimension - 1]);
        }
        out
    }
}

fn parse_row(row: &str, line: usize) -> Result<DirectionRecord, SobolError> {
    let malformed = |reason: String| SobolError::MalformedRow { line, reason };
    let fields = row
        .split_whitespace()
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| malformed(format!("`{t}` is not a non-negative integer")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if fields.len() < 4 {
        return Err(malformed(format!("expected at least 4 fields, found {}", fields.len())));
    }
    let dimension = fields[0] as usize;
    let degree = fields[1];
    let coefficients = fields[2];
    if degree == 0 || degree > 63 {
        return Err(malformed(format!("degree {degree} out of range")));
    }
    if fields.len() != 3 + degree as usize {
        return Err(malformed(format!(
            "degree {degree} needs {} fields, found {}",
            3 + degree,
            fields.len()
        )));
    }
    if coefficients >> (degree - 1) != 0 {
        return Err(malformed(format!(
            "coefficient word {coefficients} does not fit in {} bits",
            degree - 1
        )));
    }
    let initial_m = fields[3..].to_vec();
    for (i, &m) in initial_m.iter().enumerate() {
        let index = i + 1;
        if m % 2 == 0 || m >> index != 0 {
            return Err(SobolError::InvalidM {
                line,
                dimension,
                index,
                value: m,
            });
        }
    }
    Ok(DirectionRecord {
        dimension,
        degree: degree as u32,
        coefficients,
        initial_m,
    })
}

fn direction_integers(record: &DirectionRecord) -> [u32; BITS] {
    let s = record.degree as usize;
    let a = record.coefficients;
    let mut m = [0u64; BITS + 1];
    for j in 1..=BITS {
        m[j] = if j <= s {
            record.initial_m[j - 1]
        } else {
            let mut value = m[j - s] ^ (m[j - s] << s);
            for k in 1..s {
                if (a >> (s - 1 - k)) & 1 == 1 {
                    value ^= m[j - k] << k;
                }
            }
            value
        };
    }
    let mut v = [0u32; BITS];
    for j in 1..=BITS {
        // m_j < 2^j, so the shifted value fits in 32 bits.
        v[j - 1] = (m[j] << (BITS - j)) as u32;
    }
    v
}

/// Immutable `n_max x d` table of Sobol' integers, column per dimension.
#[derive(Debug)]
pub struct SobolCache {
    n_max: usize,
    dimensions: usize,
    columns: Vec<u32>,
}

impl SobolCache {
    pub fn build(
        table: &DirectionNumberTable,
        n_max: usize,
        dimensions: usize,
        budget_bytes: usize,
    ) -> Result<Self, SobolError> {
        table.check_dimension(dimensions.max(1))?;
        if n_max as u64 > MAX_POINT_INDEX {
            return Err(SobolError::SequenceExhausted {
                dimension: dimensions,
            });
        }
        let bytes = n_max
            .checked_mul(dimensions)
            .and_then(|c| c.checked_mul(std::mem::size_of::<u32>()))
            .unwrap_or(usize::MAX);
        if bytes > budget_bytes {
            return Err(SobolError::CacheTooLarge {
                n_max,
                dimensions,
                bytes,
                budget: budget_bytes,
            });
        }
        let mut columns = vec![0u32; n_max * dimensions];
        let mut state = vec![0u32; dimensions];
        for i in 0..n_max {
            let bit = (i as u64).trailing_ones() as usize;
            for (d, x) in state.iter_mut().enumerate() {
                *x ^= table.directions[d][bit];
                columns[d * n_max + i] = *x;
            }
        }
        Ok(Self {
            n_max,
            dimensions,
            columns,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dimensions(&self) -> usize {
        self.dimensions
    }

    fn column(&self, dimension: usize) -> Option<&[u32]> {
        if dimension == 0 || dimension > self.dimensions {
            return None;
        }
        let start = (dimension - 1) * self.n_max;
        Some(&self.columns[start..start + self.n_max])
    }
}

/// Stateful generator over dimensions `1..=dimensions`. Each dimension keeps
/// its own cursor, so repeated draws continue that dimension's stream.
#[derive(Debug, Clone)]
pub struct SobolEngine {
    table: Arc<DirectionNumberTable>,
    dimensions: usize,
    cursors: Vec<u64>,
    cache: Option<Arc<SobolCache>>,
}

impl SobolEngine {
    pub fn new(table: Arc<DirectionNumberTable>, dimensions: usize) -> Result<Self, SobolError> {
        table.check_dimension(dimensions)?;
        Ok(Self {
            table,
            dimensions,
            cursors: vec![0; dimensions],
            cache: None,
        })
    }

    pub fn dimensions(&self) -> usize {
        self.dimensions
    }

    pub fn table(&self) -> &Arc<DirectionNumberTable> {
        &self.table
    }

    pub fn cache(&self) -> Option<&Arc<SobolCache>> {
        self.cache.as_ref()
    }

    /// Precomputes the first `n_max` draws of dimensions `1..=d` and serves later
    /// draws from the table.
    pub fn build_cache(
        &mut self,
        n_max: usize,
        d: usize,
        budget_bytes: usize,
    ) -> Result<Arc<SobolCache>, SobolError> {
        self.check_dimension(d)?;
        let cache = Arc::new(SobolCache::build(&self.table, n_max, d, budget_bytes)?);
        self.cache = Some(Arc::clone(&cache));
        Ok(cache)
    }

    /// Attaches an existing cache built from the same direction table.
    pub fn attach_cache(&mut self, cache: Arc<SobolCache>) -> Result<(), SobolError> {
        self.check_dimension(cache.dimensions().max(1))?;
        self.cache = Some(cache);
        Ok(())
    }

    /// Number of draws emitted so far from dimension `k`.
    pub fn position(&self, dimension: usize) -> Result<u64, SobolError> {
        self.check_dimension(dimension)?;
        Ok(self.cursors[dimension - 1])
    }

    pub fn reset(&mut self) {
        self.cursors.iter_mut().for_each(|c| *c = 0);
    }

    /// Next `n` values of dimension `k`, as 32-bit integers (value = x / 2^32).
    pub fn draw_integers(&mut self, dimension: usize, n: usize) -> Result<Vec<u32>, SobolError> {
        self.check_dimension(dimension)?;
        let start = self.cursors[dimension - 1];
        let end = start + n as u64;
        if end > MAX_POINT_INDEX {
            return Err(SobolError::SequenceExhausted { dimension });
        }
        let mut out = Vec::with_capacity(n);
        // Post-skip draw i (1-based) is point i, stored at cache row i - 1.
        if let Some(column) = self.cache.as_ref().and_then(|c| c.column(dimension)) {
            let hit_end = end.min(column.len() as u64);
            if start < hit_end {
                out.extend_from_slice(&column[start as usize..hit_end as usize]);
            }
        }
        let produced = start + out.len() as u64;
        if produced < end {
            let rest = (end - produced) as usize;
            out.extend(self.table.joint_column(dimension, produced, rest));
        }
        self.cursors[dimension - 1] = end;
        Ok(out)
    }

    /// Next `n` values of dimension `k`, each strictly inside `(0, 1)`.
    pub fn draw(&mut self, dimension: usize, n: usize) -> Result<Vec<f64>, SobolError> {
        Ok(self
            .draw_integers(dimension, n)?
            .into_iter()
            .map(|x| x as f64 * TO_UNIT)
            .collect())
    }

    fn check_dimension(&self, dimension: usize) -> Result<(), SobolError> {
        if dimension == 0 || dimension > self.dimensions {
            return Err(SobolError::DimensionOutOfRange {
                dimension,
                max: self.dimensions,
            });
        }
        Ok(())
    }
}
