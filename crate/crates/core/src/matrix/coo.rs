use crate::error::{shape_err, Error};
use crate::matrix::SparseCsr;
use crate::Result;

/// Coordinate-format sparse matrix, entries sorted by `(row, col)` with no
/// duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoo {
    rows: usize,
    cols: usize,
    row_idx: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCoo {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        Ok(SparseCsr::from_triplets(rows, cols, triplets)?.to_coo())
    }

    pub(crate) fn from_parts_unchecked(
        rows: usize,
        cols: usize,
        row_idx: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = Self {
            rows,
            cols,
            row_idx,
            col_idx,
            values,
        };
        debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
        m
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.row_idx.len();
        if self.col_idx.len() != n || self.values.len() != n {
            return Err(shape_err!("COO index/value arrays differ in length"));
        }
        for m in 0..n {
            let (r, c) = (self.row_idx[m], self.col_idx[m]);
            if r >= self.rows || c >= self.cols {
                return Err(Error::Index(format!(
                    "({r}, {c}) outside {}x{}",
                    self.rows, self.cols
                )));
            }
            if m > 0 && (self.row_idx[m - 1], self.col_idx[m - 1]) >= (r, c) {
                return Err(shape_err!("COO entry {m} out of order or duplicated"));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.row_idx
            .iter()
            .zip(&self.col_idx)
            .zip(&self.values)
            .map(|((&r, &c), &v)| (r, c, v))
    }

    pub fn to_csr(&self) -> SparseCsr {
        let mut row_ptr = vec![0usize; self.rows + 1];
        for &r in &self.row_idx {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseCsr::from_parts_unchecked(
            self.rows,
            self.cols,
            row_ptr,
            self.col_idx.clone(),
            self.values.clone(),
        )
    }
}
