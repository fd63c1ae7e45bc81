use crate::error::shape_err;
use crate::laqops::domain::{build_key_domain, key_matrix, Orientation};
use crate::matrix::SparseCsr;
use crate::Result;

/// Distinct group values of a relation and the one-hot `rows x groups`
/// membership matrix assigning each row to its group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMap {
    groups: Vec<i64>,
    group_of_row: Vec<usize>,
    mat: SparseCsr,
}

impl GroupMap {
    pub fn build(group_col: &[i64]) -> Self {
        let mut groups = group_col.to_vec();
        groups.sort_unstable();
        groups.dedup();
        let group_of_row: Vec<usize> = group_col
            .iter()
            .map(|g| groups.binary_search(g).expect("group present"))
            .collect();
        let mat = SparseCsr::one_per_row(
            groups.len(),
            group_of_row.clone(),
            vec![1.0; group_col.len()],
        );
        Self {
            groups,
            group_of_row,
            mat,
        }
    }

    pub fn groups(&self) -> &[i64] {
        &self.groups
    }

    pub fn matrix(&self) -> &SparseCsr {
        &self.mat
    }

    pub fn group_of_row(&self, row: usize) -> usize {
        self.group_of_row[row]
    }

    /// Rows of group `g` in row order.
    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.group_of_row.len())
            .filter(|&r| self.group_of_row[r] == g)
            .collect()
    }
}

/// `SELECT group_s, SUM(vals_r) FROM R JOIN S ON keys_r = keys_s GROUP BY group_s`.
///
/// Evaluated as `1ᵀ · MAT_R · (MAT_S · G_S)` with `MAT_R` carrying the values.
/// Every distinct `group_s` value is reported, with sum 0 if nothing joined.
pub fn groupby_sum_single(
    keys_r: &[i64],
    vals_r: &[f64],
    keys_s: &[i64],
    group_s: &[i64],
) -> Result<Vec<(i64, f64)>> {
    if keys_r.len() != vals_r.len() || keys_s.len() != group_s.len() {
        return Err(shape_err!(
            "R has {} keys and {} values, S has {} keys and {} groups",
            keys_r.len(),
            vals_r.len(),
            keys_s.len(),
            group_s.len()
        ));
    }
    let domain = build_key_domain(keys_r, keys_s)?;
    let mat_r = key_matrix(keys_r, &domain, Orientation::RowsByDomain, Some(vals_r))?;
    let mat_s = key_matrix(keys_s, &domain, Orientation::DomainByRows, None)?;
    let gm = GroupMap::build(group_s);
    let key_groups = mat_s.spmm(gm.matrix())?;
    let per_row = mat_r.spmm(&key_groups)?;
    let ones = SparseCsr::one_per_row(
        per_row.rows(),
        vec![0; per_row.rows()],
        vec![1.0; per_row.rows()],
    )
    .transpose();
    let reduced = ones.spmm(&per_row)?;
    let mut sums = vec![0.0; gm.groups().len()];
    let (cols, vals) = reduced.row(0);
    for (&g, &v) in cols.iter().zip(vals) {
        sums[g] = v;
    }
    Ok(gm.groups.iter().copied().zip(sums).collect())
}

/// Number of joined rows per group, so callers can drop groups that matched nothing.
pub fn groupby_count_single(
    keys_r: &[i64],
    keys_s: &[i64],
    group_s: &[i64],
) -> Result<Vec<(i64, f64)>> {
    groupby_sum_single(keys_r, &vec![1.0; keys_r.len()], keys_s, group_s)
}

/// Sums `vals` per distinct tuple of `group_cols`, found by a stable
/// lexicographic sort and unique pass, then scatter-added in row order.
/// Groups are returned in ascending tuple order.
pub fn groupby_sum_multi(group_cols: &[&[i64]], vals: &[f64]) -> Result<Vec<(Vec<i64>, f64)>> {
    let n = vals.len();
    if let Some(c) = group_cols.iter().find(|c| c.len() != n) {
        return Err(shape_err!(
            "group column has {} rows, values have {n}",
            c.len()
        ));
    }
    let tuple = |r: usize| group_cols.iter().map(move |c| c[r]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| tuple(a).cmp(tuple(b)));

    let mut group_of_row = vec![0usize; n];
    let mut keys: Vec<Vec<i64>> = Vec::new();
    for (pos, &r) in order.iter().enumerate() {
        if pos == 0 || !tuple(order[pos - 1]).eq(tuple(r)) {
            keys.push(tuple(r).collect());
        }
        group_of_row[r] = keys.len() - 1;
    }

    let mut sums = vec![0.0; keys.len()];
    for (r, &v) in vals.iter().enumerate() {
        sums[group_of_row[r]] += v;
    }
    Ok(keys.into_iter().zip(sums).collect())
}
