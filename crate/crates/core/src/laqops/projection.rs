use crate::error::{shape_err, Error};
use crate::matrix::{DenseMat, SparseCsr};
use crate::Result;

/// One-hot `c x k` column mapping matrix.
///
/// Entry `(s, t)` is 1 when source column `s` lands in target column `t`.
/// Every target column has at most one source; a map built with
/// [`build_column_map`] covers all of them, while [`ColumnMap::placement`]
/// may leave target columns empty (used to place one table's columns into a
/// slice of a wider layout).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    mat: SparseCsr,
    source_of_target: Vec<Option<usize>>,
}

/// Map whose targets are exactly `0..mapping.len()`.
pub fn build_column_map(source_cols: usize, mapping: &[(usize, usize)]) -> Result<ColumnMap> {
    let m = ColumnMap::placement(source_cols, mapping.len(), mapping)?;
    debug_assert!(m.is_total());
    Ok(m)
}

impl ColumnMap {
    pub fn placement(
        source_cols: usize,
        target_cols: usize,
        mapping: &[(usize, usize)],
    ) -> Result<Self> {
        let mut source_of_target = vec![None; target_cols];
        for &(s, t) in mapping {
            if s >= source_cols {
                return Err(Error::Index(format!("source column {s} >= {source_cols}")));
            }
            if t >= target_cols {
                return Err(Error::Mapping(format!(
                    "target column {t} >= {target_cols}"
                )));
            }
            if source_of_target[t].replace(s).is_some() {
                return Err(Error::Mapping(format!("target column {t} mapped twice")));
            }
        }
        let triplets: Vec<_> = mapping.iter().map(|&(s, t)| (s, t, 1.0)).collect();
        let mat = SparseCsr::from_triplets(source_cols, target_cols, &triplets)?;
        Ok(Self {
            mat,
            source_of_target,
        })
    }

    /// Identity map on `n` columns.
    pub fn identity(n: usize) -> Self {
        Self {
            mat: SparseCsr::identity(n),
            source_of_target: (0..n).map(Some).collect(),
        }
    }

    pub fn matrix(&self) -> &SparseCsr {
        &self.mat
    }

    pub fn source_cols(&self) -> usize {
        self.mat.rows()
    }

    pub fn target_cols(&self) -> usize {
        self.mat.cols()
    }

    pub fn source_of(&self, target: usize) -> Option<usize> {
        self.source_of_target[target]
    }

    /// `(source, target)` pairs, in source order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mat.triplets().map(|(s, t, _)| (s, t))
    }

    /// Target columns that receive a source column.
    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.source_of_target
            .iter()
            .enumerate()
            .filter_map(|(t, s)| s.map(|_| t))
    }

    pub fn is_total(&self) -> bool {
        self.source_of_target.iter().all(Option::is_some)
    }
}

/// `t · M`. Because `M` is one-hot by column, each output column is the
/// corresponding source column times 1, so values are never altered.
pub fn project(t: &DenseMat, m: &ColumnMap) -> Result<DenseMat> {
    if t.cols() != m.source_cols() {
        return Err(shape_err!(
            "table has {} columns, map expects {}",
            t.cols(),
            m.source_cols()
        ));
    }
    let k = m.target_cols();
    let mut out = DenseMat::zeros(t.rows(), k);
    let plan: Vec<(usize, usize, f64)> = m.mat.triplets().collect();
    for r in 0..t.rows() {
        let src = t.row(r);
        let dst = out.row_mut(r);
        for &(s, tc, v) in &plan {
            dst[tc] = src[s] * v;
        }
    }
    Ok(out)
}
