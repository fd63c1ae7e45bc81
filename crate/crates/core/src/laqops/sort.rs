use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::matrix::DenseMat;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub col: usize,
    pub dir: SortDirection,
}

impl SortKey {
    pub fn asc(col: usize) -> Self {
        Self {
            col,
            dir: SortDirection::Asc,
        }
    }

    pub fn desc(col: usize) -> Self {
        Self {
            col,
            dir: SortDirection::Desc,
        }
    }
}

/// One output row of an aggregate query: the group tuple and its sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub group: Vec<i64>,
    pub sum: f64,
}

fn directed(o: Ordering, dir: SortDirection) -> Ordering {
    match dir {
        SortDirection::Asc => o,
        SortDirection::Desc => o.reverse(),
    }
}

fn check(keys: &[SortKey], width: usize) -> Result<()> {
    match keys.iter().find(|k| k.col >= width) {
        Some(k) => Err(Error::Index(format!("sort column {} of {width}", k.col))),
        None => Ok(()),
    }
}

/// Stable lexicographic sort of matrix rows.
pub fn sort_rows(t: &DenseMat, keys: &[SortKey]) -> Result<DenseMat> {
    check(keys, t.cols())?;
    let mut order: Vec<usize> = (0..t.rows()).collect();
    order.sort_by(|&a, &b| {
        keys.iter()
            .map(|k| directed(t.get(a, k.col).total_cmp(&t.get(b, k.col)), k.dir))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    t.gather_rows(&order)
}

/// Stable lexicographic sort of result rows. Column `c < group.len()` is a
/// group column; `c == group.len()` is the sum.
pub fn sort_result_rows(rows: &[ResultRow], keys: &[SortKey]) -> Result<Vec<ResultRow>> {
    let width = rows
        .iter()
        .map(|r| r.group.len() + 1)
        .min()
        .unwrap_or(usize::MAX);
    check(keys, width)?;
    let cmp_col = |a: &ResultRow, b: &ResultRow, c: usize| {
        if c < a.group.len() {
            a.group[c].cmp(&b.group[c])
        } else {
            a.sum.total_cmp(&b.sum)
        }
    };
    let mut out = rows.to_vec();
    out.sort_by(|a, b| {
        keys.iter()
            .map(|k| directed(cmp_col(a, b, k.col), k.dir))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sorted_input_unchanged_and_reverse() {
        let t = DenseMat::from_rows(&[[1.0, 9.0], [2.0, 8.0], [3.0, 7.0]]).unwrap();
        assert_eq!(sort_rows(&t, &[SortKey::asc(0)]).unwrap(), t);
        let rev = sort_rows(&t, &[SortKey::asc(1)]).unwrap();
        assert_eq!(rev.column(0), vec![3.0, 2.0, 1.0]);
        assert!(matches!(
            sort_rows(&t, &[SortKey::asc(2)]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn stable_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let rows: Vec<[f64; 2]> = (0..300)
            .map(|i| [rng.gen_range(0..5) as f64, i as f64])
            .collect();
        let t = DenseMat::from_rows(&rows).unwrap();
        let got = sort_rows(&t, &[SortKey::desc(0)]).unwrap();
        let mut want = rows.clone();
        want.sort_by(|a, b| b[0].total_cmp(&a[0]).then(a[1].total_cmp(&b[1])));
        assert_eq!(got, DenseMat::from_rows(&want).unwrap());
    }

    #[test]
    fn result_rows_by_group_then_sum() {
        let rows = vec![
            ResultRow {
                group: vec![2, 1],
                sum: 5.0,
            },
            ResultRow {
                group: vec![1, 3],
                sum: 9.0,
            },
            ResultRow {
                group: vec![1, 2],
                sum: 9.0,
            },
            ResultRow {
                group: vec![2, 0],
                sum: 1.0,
            },
        ];
        let got = sort_result_rows(&rows, &[SortKey::asc(0), SortKey::desc(2)]).unwrap();
        let groups: Vec<_> = got.iter().map(|r| r.group.clone()).collect();
        assert_eq!(groups, vec![vec![1, 3], vec![1, 2], vec![2, 1], vec![2, 0]]);
        assert!(sort_result_rows(&rows, &[SortKey::asc(3)]).is_err());
    }
}
