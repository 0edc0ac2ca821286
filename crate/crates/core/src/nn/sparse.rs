use super::real::Real;

/// Row-compressed feature matrix. MNIST images are mostly zero pixels, so the
/// first dense layer only visits the nonzeros of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows<T> {
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Real> SparseRows<T> {
    /// Keeps the nonzero entries of a row-major dense matrix.
    pub fn from_dense(dense: &[T], cols: usize) -> Self {
        assert!(cols > 0 && dense.len().is_multiple_of(cols), "dense length must be a multiple of cols");
        let mut offsets = Vec::with_capacity(dense.len() / cols + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for row in dense.chunks_exact(cols) {
            for (j, &v) in row.iter().enumerate() {
                if v != T::ZERO {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            offsets.push(values.len());
        }
        Self {
            cols,
            offsets,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let (s, e) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::ZERO; self.rows() * self.cols];
        for i in 0..self.rows() {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[i * self.cols + j as usize] = v;
            }
        }
        out
    }
}
