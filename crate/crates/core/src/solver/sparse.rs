use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

/// Row-compressed sparse matrix, built one row at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn with_capacity(ncols: usize, rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self {
            ncols,
            row_ptr,
            col_idx: Vec::with_capacity(nnz),
            values: Vec::with_capacity(nnz),
        }
    }

    /// Append a row given as `(column, value)` entries.
    ///
    /// # Panics
    /// If a column is out of range.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range");
            self.col_idx.push(c);
            self.values.push(v);
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = Self::new(m.ncols());
        for r in 0..m.nrows() {
            out.push_row((0..m.ncols()).filter(|&c| m[(r, c)] != 0.0).map(|c| (c, m[(r, c)])));
        }
        out
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows());
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `y = A^T x`
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows());
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
    }

    /// Diagonal of `A^T A` (squared column norms).
    pub fn normal_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.ncols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            d[c] += v * v;
        }
        d
    }

    /// Diagonal `b x b` blocks of `A^T A`, row-major, one per column block.
    /// `ncols` must be a multiple of `b`.
    pub fn normal_block_diagonal(&self, b: usize) -> Vec<f64> {
        assert!(b > 0 && self.ncols % b == 0, "column count must be a multiple of the block size");
        let mut blocks = vec![0.0; self.ncols * b];
        for r in 0..self.nrows() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for e1 in lo..hi {
                let (c1, v1) = (self.col_idx[e1], self.values[e1]);
                let base = (c1 / b) * b * b + (c1 % b) * b;
                for e2 in lo..hi {
                    let c2 = self.col_idx[e2];
                    if c2 / b == c1 / b {
                        blocks[base + c2 % b] += v1 * self.values[e2];
                    }
                }
            }
        }
        blocks
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}
