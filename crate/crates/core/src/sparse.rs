//! Compressed sparse row matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A real matrix in compressed-row layout.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite. Entries that are not stored are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one row: parallel slices of column indices and values.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    /// Column indices, strictly increasing.
    pub indices: &'a [usize],
    /// Values aligned with `indices`.
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Value at column `col`, zero when not stored.
    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(column, value)` pairs in column order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

impl SparseMatrix {
    /// An all-zero `rows x cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Assembles a matrix from raw CSR arrays, checking every layout invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: rows + 1,
                got: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: col_idx.len(),
                got: values.len(),
            });
        }
        if row_ptr[0] != 0 || row_ptr[rows] != col_idx.len() {
            return Err(Error::InvalidParameter(
                "row_ptr must start at 0 and end at nnz".into(),
            ));
        }
        for r in 0..rows {
            let (s, e) = (row_ptr[r], row_ptr[r + 1]);
            if e < s {
                return Err(Error::InvalidParameter(format!(
                    "row_ptr decreases at row {r}"
                )));
            }
            for p in s..e {
                if col_idx[p] >= cols {
                    return Err(Error::InvalidParameter(format!(
                        "column {} out of range in row {r}",
                        col_idx[p]
                    )));
                }
                if p > s && col_idx[p] <= col_idx[p - 1] {
                    return Err(Error::InvalidParameter(format!(
                        "columns not strictly increasing in row {r}"
                    )));
                }
                if !values[p].is_finite() {
                    return Err(Error::NonFinite(format!("({r}, {})", col_idx[p])));
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// When the same position appears more than once the last occurrence wins.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable: equal positions keep input order, so the last one is kept below
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            if r >= rows || c >= cols {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() = v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_parts(rows, cols, row_ptr, col_idx, values)
    }

    /// Stores every entry of a row-major dense matrix, zeros included.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        let row_ptr = (0..=rows).map(|r| r * cols).collect();
        let col_idx = (0..rows).flat_map(|_| 0..cols).collect();
        Self::from_parts(rows, cols, row_ptr, col_idx, data.to_vec())
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row offsets, length `rows + 1`.
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Column index of every stored entry.
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Value of every stored entry.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Borrowed view of row `r`.
    pub fn row(&self, r: usize) -> SparseRow<'_> {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        SparseRow {
            indices: &self.col_idx[s..e],
            values: &self.values[s..e],
        }
    }

    /// Value at `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).get(c)
    }

    /// Stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |(c, v)| (r, c, v)))
    }

    /// The transpose, also in compressed-row layout.
    pub fn transpose(&self) -> SparseMatrix {
        let mut row_ptr = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for c in 0..self.cols {
            row_ptr[c + 1] += row_ptr[c];
        }
        let mut next = row_ptr.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows visited in order keep the transposed columns sorted
        for r in 0..self.rows {
            for (c, v) in self.row(r).iter() {
                let p = next[c];
                col_idx[p] = r;
                values[p] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Square submatrix keeping the rows and columns listed in `keep`
    /// (ascending), renumbered to `0..keep.len()`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut local = vec![usize::MAX; self.cols.max(self.rows)];
        for (new, &old) in keep.iter().enumerate() {
            local[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &old in keep {
            for (c, v) in self.row(old).iter() {
                if local[c] != usize::MAX {
                    col_idx.push(local[c]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            rows: keep.len(),
            cols: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).values.iter().sum()).collect()
    }

    /// First stored position where `A[i][j] != A[j][i]`, if any.
    pub fn find_asymmetry(&self) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return Some((self.rows.min(self.cols), self.rows.min(self.cols)));
        }
        self.triplets()
            .find(|&(r, c, v)| self.get(c, r) != v)
            .map(|(r, c, _)| (r, c))
    }
}
