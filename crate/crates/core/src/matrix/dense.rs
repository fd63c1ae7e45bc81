use crate::error::{shape_err, Error};
use crate::matrix::SparseCsr;
use crate::Result;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| shape_err!("{rows}x{cols} overflows"))?;
        if data.len() != expected {
            return Err(shape_err!(
                "{rows}x{cols} matrix needs {expected} values, got {}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows. An empty slice yields `0 x 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape_err!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                ));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(
            r < self.rows && c < self.cols,
            "({r}, {c}) outside {}x{}",
            self.rows,
            self.cols
        );
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols + c])
            .collect()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows instead.
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Copies the listed rows, in the order given.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            if r >= self.rows {
                return Err(Error::Index(format!("row {r} of {}", self.rows)));
            }
            data.extend_from_slice(self.row(r));
        }
        Self::new(idx.len(), self.cols, data)
    }

    /// Dense product `self · b`.
    pub fn matmul(&self, b: &DenseMat) -> Result<DenseMat> {
        if self.cols != b.rows {
            return Err(shape_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                b.rows,
                b.cols
            ));
        }
        let mut out = DenseMat::zeros(self.rows, b.cols);
        if b.cols == 0 {
            return Ok(out);
        }
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in o_row.iter_mut().zip(b_row) {
                    *o += a * bv;
                }
            }
        }
        Ok(out)
    }

    /// Product with a sparse right operand, `self · b`.
    pub fn mul_csr(&self, b: &SparseCsr) -> Result<DenseMat> {
        if self.cols != b.rows() {
            return Err(shape_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                b.rows(),
                b.cols()
            ));
        }
        let mut out = DenseMat::zeros(self.rows, b.cols());
        if b.cols() == 0 {
            return Ok(out);
        }
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let o_row = &mut out.data[i * b.cols()..(i + 1) * b.cols()];
            for (k, &a) in a_row.iter().enumerate() {
                let (cols, vals) = b.row(k);
                for (&j, &v) in cols.iter().zip(vals) {
                    o_row[j] += a * v;
                }
            }
        }
        Ok(out)
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[&DenseMat]) -> Result<DenseMat> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(shape_err!("hstack row counts differ: {rows} vs {}", b.rows));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(r));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Largest element-wise relative difference, `|a-b| / max(|a|, |b|, 1e-300)`.
    pub fn max_rel_diff(&self, other: &DenseMat) -> Option<f64> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| {
                    if a == b {
                        0.0
                    } else {
                        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
                    }
                })
                .fold(0.0, f64::max),
        )
    }
}
