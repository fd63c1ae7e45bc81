use crate::error::{shape_err, Error};
use crate::matrix::{DenseMat, SparseCoo};
use crate::Result;

/// Compressed sparse row matrix in canonical form.
///
/// `row_ptr[r]..row_ptr[r + 1]` spans row `r` in `col_idx`/`values`. Columns
/// are strictly increasing within a row and no stored value is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCsr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCsr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a canonical CSR matrix. Duplicate `(row, col)` entries are summed
    /// in input order; entries that sum to zero are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Index(format!("({r}, {c}) outside {rows}x{cols}")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..rows {
            let seg = &mut bucket[counts[r]..counts[r + 1]];
            // stable, so duplicates are summed in the order they were given
            seg.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < seg.len() {
                let c = seg[i].0;
                let mut sum = seg[i].1;
                i += 1;
                while i < seg.len() && seg[i].0 == c {
                    sum += seg[i].1;
                    i += 1;
                }
                if sum != 0.0 {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Wraps raw arrays after checking every canonical-form invariant.
    pub fn try_from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Internal constructor for kernels that build canonical output directly.
    pub(crate) fn from_parts_unchecked(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
        m
    }

    /// One entry per row, `(r, cols[r], values[r])`. Used for one-hot matrices.
    pub(crate) fn one_per_row(cols: usize, col_of_row: Vec<usize>, values: Vec<f64>) -> Self {
        let rows = col_of_row.len();
        debug_assert_eq!(rows, values.len());
        if values.iter().all(|&v| v != 0.0) {
            return Self::from_parts_unchecked(
                rows,
                cols,
                (0..=rows).collect(),
                col_of_row,
                values,
            );
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(rows);
        let mut vals = Vec::with_capacity(rows);
        row_ptr.push(0);
        for (c, v) in col_of_row.into_iter().zip(values) {
            if v != 0.0 {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(rows, cols, row_ptr, col_idx, vals)
    }

    /// Checks the canonical-form invariants.
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.rows + 1 {
            return Err(shape_err!(
                "row_ptr has {} entries for {} rows",
                self.row_ptr.len(),
                self.rows
            ));
        }
        if self.row_ptr[0] != 0 || self.row_ptr[self.rows] != self.col_idx.len() {
            return Err(shape_err!("row_ptr must start at 0 and end at nnz"));
        }
        if self.col_idx.len() != self.values.len() {
            return Err(shape_err!(
                "{} column indices but {} values",
                self.col_idx.len(),
                self.values.len()
            ));
        }
        for r in 0..self.rows {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if lo > hi {
                return Err(shape_err!("row_ptr decreases at row {r}"));
            }
            let cols = &self.col_idx[lo..hi];
            if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
                return Err(Error::Index(format!(
                    "column {c} in row {r} >= {}",
                    self.cols
                )));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(shape_err!("row {r} columns not strictly increasing"));
            }
            if self.values[lo..hi].contains(&0.0) {
                return Err(shape_err!("explicit zero stored in row {r}"));
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
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn transpose(&self) -> SparseCsr {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in ascending order, so each output row comes out sorted
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self::from_parts_unchecked(self.cols, self.rows, counts, col_idx, values)
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            out.row_mut(r)[c] = v;
        }
        out
    }

    pub fn to_coo(&self) -> SparseCoo {
        let mut row_idx = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            row_idx.extend(std::iter::repeat_n(
                r,
                self.row_ptr[r + 1] - self.row_ptr[r],
            ));
        }
        SparseCoo::from_parts_unchecked(
            self.rows,
            self.cols,
            row_idx,
            self.col_idx.clone(),
            self.values.clone(),
        )
    }

    /// Sparse-sparse product by row-wise (Gustavson) accumulation.
    pub fn spmm(&self, b: &SparseCsr) -> Result<SparseCsr> {
        if self.cols != b.rows {
            return Err(shape_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                b.rows,
                b.cols
            ));
        }
        let mut acc = vec![0.0f64; b.cols];
        let mut mark = vec![usize::MAX; b.cols];
        let mut touched: Vec<usize> = Vec::new();

        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.rows {
            let (a_cols, a_vals) = self.row(i);
            if let ([k], [a]) = (a_cols, a_vals) {
                // single contributor: the row of b is already canonical
                let (b_cols, b_vals) = b.row(*k);
                for (&j, &bv) in b_cols.iter().zip(b_vals) {
                    let p = a * bv;
                    if p != 0.0 {
                        col_idx.push(j);
                        values.push(p);
                    }
                }
                row_ptr.push(col_idx.len());
                continue;
            }
            touched.clear();
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = b.row(k);
                for (&j, &bv) in b_cols.iter().zip(b_vals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = a * bv;
                        touched.push(j);
                    } else {
                        acc[j] += a * bv;
                    }
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(
            self.rows, b.cols, row_ptr, col_idx, values,
        ))
    }

    /// Sparse-dense product `self · b`.
    pub fn spmm_dense(&self, b: &DenseMat) -> Result<DenseMat> {
        let mut out = DenseMat::zeros(self.rows, b.cols());
        self.spmm_dense_acc(b, &mut out)?;
        Ok(out)
    }

    /// Accumulates `self · b` into `out`.
    pub fn spmm_dense_acc(&self, b: &DenseMat, out: &mut DenseMat) -> Result<()> {
        if self.cols != b.rows() {
            return Err(shape_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                b.rows(),
                b.cols()
            ));
        }
        if out.shape() != (self.rows, b.cols()) {
            return Err(shape_err!(
                "accumulator is {}x{}, product is {}x{}",
                out.rows(),
                out.cols(),
                self.rows,
                b.cols()
            ));
        }
        if b.cols() == 0 {
            return Ok(());
        }
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let o_row = out.row_mut(i);
            for (&k, &a) in cols.iter().zip(vals) {
                for (o, &bv) in o_row.iter_mut().zip(b.row(k)) {
                    *o += a * bv;
                }
            }
        }
        Ok(())
    }
}
