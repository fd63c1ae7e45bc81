use std::collections::HashSet;

use crate::error::{shape_err, Error};
use crate::laqops::domain::{
    build_key_domain, key_matrix, update_key_domain, KeyDomain, Orientation,
};
use crate::laqops::projection::ColumnMap;
use crate::matrix::{DenseMat, SparseCoo, SparseCsr};
use crate::storage::Table;
use crate::timing::{Stage, StageTimes};
use crate::Result;

/// Binary row matching matrix: entry `(i, j)` marks that row `i` of the left
/// relation joins row `j` of the right one. Entries are in `(i, j)` order,
/// which is also the row order of the joined result.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatch {
    mat: SparseCoo,
}

impl RowMatch {
    pub fn matrix(&self) -> &SparseCoo {
        &self.mat
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mat.shape()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mat
            .row_idx()
            .iter()
            .copied()
            .zip(self.mat.col_idx().iter().copied())
    }

    pub fn to_csr(&self) -> SparseCsr {
        self.mat.to_csr()
    }

    fn from_pairs(rows: usize, cols: usize, row_idx: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let n = row_idx.len();
        Self {
            mat: SparseCoo::from_parts_unchecked(rows, cols, row_idx, col_idx, vec![1.0; n]),
        }
    }
}

/// Equi-join of two key columns as `MAT_R · MAT_S`, where both operands are
/// one-hot key matrices over the union of the keys.
pub fn mm_join(keys_r: &[i64], keys_s: &[i64]) -> Result<RowMatch> {
    let domain = build_key_domain(keys_r, keys_s)?;
    mm_join_in_domain(keys_r, keys_s, &domain)
}

/// [`mm_join`] over a prebuilt domain that must contain every key of both inputs.
pub fn mm_join_in_domain(keys_r: &[i64], keys_s: &[i64], domain: &KeyDomain) -> Result<RowMatch> {
    let mat_r = key_matrix(keys_r, domain, Orientation::RowsByDomain, None)?;
    let mat_s = key_matrix(keys_s, domain, Orientation::DomainByRows, None)?;
    let mat = mat_r.spmm(&mat_s)?.to_coo();
    debug_assert!(mat.values().iter().all(|&v| v == 1.0));
    Ok(RowMatch { mat })
}

/// Splits `I` into `I_R` (`nnz x r_R`) and `I_S` (`nnz x r_S`); row `m` of
/// each selects the source rows of the `m`-th joined tuple.
pub fn row_mapping_matrices(i: &RowMatch) -> (SparseCsr, SparseCsr) {
    let coo = &i.mat;
    let ones = vec![1.0; coo.nnz()];
    (
        SparseCsr::one_per_row(coo.rows(), coo.row_idx().to_vec(), ones.clone()),
        SparseCsr::one_per_row(coo.cols(), coo.col_idx().to_vec(), ones),
    )
}

/// Key columns of one fact → dimension link.
#[derive(Debug, Clone, Copy)]
pub struct DimJoin<'a> {
    pub fact_keys: &'a [i64],
    pub dim_keys: &'a [i64],
}

/// Per-link key domains kept between runs.
///
/// A cached domain is extended with [`update_key_domain`] when a probe brings
/// keys it has not seen, instead of being rebuilt from scratch.
#[derive(Debug, Clone, Default)]
pub struct DomainCache {
    domains: Vec<Option<KeyDomain>>,
}

impl DomainCache {
    pub fn new(links: usize) -> Self {
        Self {
            domains: vec![None; links],
        }
    }

    /// Seeds every link's domain with its dimension keys.
    pub fn warm(dims: &[DimJoin<'_>]) -> Result<Self> {
        let domains = dims
            .iter()
            .map(|d| build_key_domain(d.dim_keys, &[]).map(Some))
            .collect::<Result<_>>()?;
        Ok(Self { domains })
    }

    pub fn get(&self, link: usize) -> Option<&KeyDomain> {
        self.domains.get(link).and_then(Option::as_ref)
    }

    fn domain_for(&mut self, link: usize, probe: &[i64], dim: &[i64]) -> Result<&KeyDomain> {
        if self.domains.len() <= link {
            self.domains.resize(link + 1, None);
        }
        let slot = &mut self.domains[link];
        let next = match slot.take() {
            Some(d) => update_key_domain(&update_key_domain(&d, dim)?, probe)?,
            None => build_key_domain(probe, dim)?,
        };
        Ok(slot.insert(next))
    }
}

/// Result of joining a fact table with several dimensions.
///
/// Target row `t` comes from fact row `fact_rows[t]`; `matches[j]` is the
/// `i x r_j` matrix mapping target rows to dimension-`j` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StarJoin {
    fact_row_count: usize,
    fact_rows: Vec<usize>,
    matches: Vec<RowMatch>,
}

impl StarJoin {
    pub fn target_rows(&self) -> usize {
        self.fact_rows.len()
    }

    pub fn fact_rows(&self) -> &[usize] {
        &self.fact_rows
    }

    pub fn matches(&self) -> &[RowMatch] {
        &self.matches
    }

    /// `I_fact`: target rows to fact rows.
    pub fn fact_map(&self) -> SparseCsr {
        SparseCsr::one_per_row(
            self.fact_row_count,
            self.fact_rows.clone(),
            vec![1.0; self.fact_rows.len()],
        )
    }

    /// `I_j` in CSR form.
    pub fn dim_maps(&self) -> Vec<SparseCsr> {
        self.matches.iter().map(RowMatch::to_csr).collect()
    }
}

/// Inner star join of `fact` with each `(dim, fk column, pk column)`.
pub fn multiway_star_join(fact: &Table, dims: &[(&Table, &str, &str)]) -> Result<StarJoin> {
    let links: Vec<DimJoin<'_>> = dims
        .iter()
        .map(|&(dim, fk, pk)| {
            Ok(DimJoin {
                fact_keys: fact.int_column(fk)?,
                dim_keys: dim.int_column(pk)?,
            })
        })
        .collect::<Result<_>>()?;
    multiway_star_join_timed(fact.row_count(), &links, None, &mut StageTimes::new())
}

/// Joins the fact table with each dimension in turn, feeding only the fact
/// rows that survived earlier joins into the next one. No intermediate table
/// is materialized; only the surviving row ids are carried along.
pub fn multiway_star_join_timed(
    fact_rows: usize,
    dims: &[DimJoin<'_>],
    mut cache: Option<&mut DomainCache>,
    stages: &mut StageTimes,
) -> Result<StarJoin> {
    if let Some(d) = dims.iter().find(|d| d.fact_keys.len() != fact_rows) {
        return Err(shape_err!(
            "fact key column has {} rows, expected {fact_rows}",
            d.fact_keys.len()
        ));
    }
    let mut survivors: Vec<usize> = (0..fact_rows).collect();
    let mut dim_rows: Vec<Vec<usize>> = Vec::with_capacity(dims.len());

    for (j, link) in dims.iter().enumerate() {
        let probe: Vec<i64> = stages.time(Stage::SparseConstruct, || {
            survivors.iter().map(|&f| link.fact_keys[f]).collect()
        });
        let fresh;
        let domain = match cache.as_deref_mut() {
            Some(c) => stages.time(Stage::DomainGen, || c.domain_for(j, &probe, link.dim_keys))?,
            None => {
                fresh =
                    stages.time(Stage::DomainGen, || build_key_domain(&probe, link.dim_keys))?;
                &fresh
            }
        };
        let (mat_r, mat_s) = stages.time(Stage::SparseConstruct, || {
            Ok::<_, Error>((
                key_matrix(&probe, domain, Orientation::RowsByDomain, None)?,
                key_matrix(link.dim_keys, domain, Orientation::DomainByRows, None)?,
            ))
        })?;
        stages.time(Stage::Spmm, || {
            let i = mat_r.spmm(&mat_s)?;
            let n = i.nnz();
            let mut next_survivors = Vec::with_capacity(n);
            let mut matched = Vec::with_capacity(n);
            let mut carried: Vec<Vec<usize>> =
                dim_rows.iter().map(|_| Vec::with_capacity(n)).collect();
            for t in 0..i.rows() {
                for &d in i.row(t).0 {
                    next_survivors.push(survivors[t]);
                    matched.push(d);
                    for (prev, out) in dim_rows.iter().zip(carried.iter_mut()) {
                        out.push(prev[t]);
                    }
                }
            }
            survivors = next_survivors;
            carried.push(matched);
            dim_rows = carried;
            Ok::<_, Error>(())
        })?;
    }

    let n = survivors.len();
    let matches = dims
        .iter()
        .zip(dim_rows)
        .map(|(link, rows)| RowMatch::from_pairs(n, link.dim_keys.len(), (0..n).collect(), rows))
        .collect();
    Ok(StarJoin {
        fact_row_count: fact_rows,
        fact_rows: survivors,
        matches,
    })
}

/// `T = Σ_j I_j · (B_j · M_j)`, where every `M_j` places table `j`'s columns
/// into a disjoint slice of the `k` target columns.
pub fn materialize(
    i_maps: &[SparseCsr],
    table_mats: &[DenseMat],
    col_maps: &[ColumnMap],
) -> Result<DenseMat> {
    if i_maps.len() != table_mats.len() || i_maps.len() != col_maps.len() {
        return Err(shape_err!(
            "{} row maps, {} tables, {} column maps",
            i_maps.len(),
            table_mats.len(),
            col_maps.len()
        ));
    }
    let Some(first) = i_maps.first() else {
        return Ok(DenseMat::zeros(0, 0));
    };
    let rows = first.rows();
    let k = col_maps[0].target_cols();
    let mut used = HashSet::new();
    for ((i, b), m) in i_maps.iter().zip(table_mats).zip(col_maps) {
        if i.rows() != rows {
            return Err(shape_err!("row maps have {} and {} rows", rows, i.rows()));
        }
        if i.cols() != b.rows() || b.cols() != m.source_cols() {
            return Err(shape_err!(
                "I is {}x{}, table is {}x{}, map expects {} columns",
                i.rows(),
                i.cols(),
                b.rows(),
                b.cols(),
                m.source_cols()
            ));
        }
        if m.target_cols() != k {
            return Err(shape_err!(
                "column maps target {} and {} columns",
                k,
                m.target_cols()
            ));
        }
        for t in m.targets() {
            if !used.insert(t) {
                return Err(Error::Mapping(format!(
                    "target column {t} filled by two tables"
                )));
            }
        }
    }

    let mut out = DenseMat::zeros(rows, k);
    for ((i, b), m) in i_maps.iter().zip(table_mats).zip(col_maps) {
        let plan: Vec<(usize, usize)> = m.pairs().collect();
        for r in 0..rows {
            let (src_rows, weights) = i.row(r);
            let dst = out.row_mut(r);
            for (&d, &w) in src_rows.iter().zip(weights) {
                let src = b.row(d);
                for &(s, t) in &plan {
                    dst[t] += w * src[s];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laqops::projection::build_column_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nested_loop(r: &[i64], s: &[i64]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, a) in r.iter().enumerate() {
            for (j, b) in s.iter().enumerate() {
                if a == b {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn two_row_swap() {
        let i = mm_join(&[0, 1], &[1, 0]).unwrap();
        assert_eq!(i.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        let (ir, is) = row_mapping_matrices(&i);
        assert_eq!(ir.col_idx(), &[0, 1]);
        assert_eq!(is.col_idx(), &[1, 0]);
    }

    #[test]
    fn disjoint_keys_empty_match() {
        let i = mm_join(&[1, 2, 3], &[4, 5]).unwrap();
        assert_eq!(i.nnz(), 0);
        assert_eq!(i.shape(), (3, 2));
        let (ir, is) = row_mapping_matrices(&i);
        assert_eq!((ir.rows(), is.rows()), (0, 0));
    }

    #[test]
    fn random_multisets_match_nested_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let r: Vec<i64> = (0..rng.gen_range(0..80))
                .map(|_| rng.gen_range(0..15))
                .collect();
            let s: Vec<i64> = (0..rng.gen_range(0..80))
                .map(|_| rng.gen_range(0..15))
                .collect();
            let i = mm_join(&r, &s).unwrap();
            assert_eq!(i.pairs().collect::<Vec<_>>(), nested_loop(&r, &s));
        }
    }

    #[test]
    fn cached_domain_gives_same_match() {
        let r = [5, 1, 9, 9, 2];
        let s = [9, 5, 7];
        let wide = build_key_domain(&(0..20).collect::<Vec<_>>(), &[]).unwrap();
        assert_eq!(
            mm_join_in_domain(&r, &s, &wide).unwrap(),
            mm_join(&r, &s).unwrap()
        );
        let narrow = build_key_domain(&[1], &[]).unwrap();
        assert!(matches!(
            mm_join_in_domain(&r, &s, &narrow),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn row_maps_reproduce_nested_loop_materialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let r_keys: Vec<i64> = (0..40).map(|_| rng.gen_range(0..10)).collect();
        let s_keys: Vec<i64> = (0..30).map(|_| rng.gen_range(0..10)).collect();
        let r = DenseMat::new(
            40,
            2,
            (0..80).map(|_| rng.gen_range(0..100) as f64).collect(),
        )
        .unwrap();
        let s = DenseMat::new(
            30,
            3,
            (0..90).map(|_| rng.gen_range(0..100) as f64).collect(),
        )
        .unwrap();
        let (ir, is) = row_mapping_matrices(&mm_join(&r_keys, &s_keys).unwrap());
        let joined =
            DenseMat::hstack(&[&ir.spmm_dense(&r).unwrap(), &is.spmm_dense(&s).unwrap()]).unwrap();
        let want: Vec<Vec<f64>> = nested_loop(&r_keys, &s_keys)
            .into_iter()
            .map(|(a, b)| r.row(a).iter().chain(s.row(b)).copied().collect())
            .collect();
        assert_eq!(joined, DenseMat::from_rows(&want).unwrap());
    }

    #[test]
    fn star_join_full_match() {
        let fact_a = [0i64, 1, 2, 1];
        let fact_b = [1i64, 1, 0, 0];
        let dim_a = [2i64, 1, 0];
        let dim_b = [0i64, 1];
        let dims = [
            DimJoin {
                fact_keys: &fact_a,
                dim_keys: &dim_a,
            },
            DimJoin {
                fact_keys: &fact_b,
                dim_keys: &dim_b,
            },
        ];
        let sj = multiway_star_join_timed(4, &dims, None, &mut StageTimes::new()).unwrap();
        assert_eq!(sj.target_rows(), 4);
        assert_eq!(sj.fact_rows(), &[0, 1, 2, 3]);
        for m in sj.dim_maps() {
            assert_eq!(m.nnz(), 4);
            assert!((0..4).all(|r| m.row(r).0.len() == 1));
        }
        assert_eq!(sj.matches()[0].matrix().col_idx(), &[2, 1, 0, 1]);
        assert_eq!(sj.matches()[1].matrix().col_idx(), &[1, 1, 0, 0]);
    }

    #[test]
    fn star_join_drops_unmatched_and_empty_dim() {
        let fact_a = [0i64, 7, 2];
        let fact_b = [1i64, 1, 0];
        let dim_a = [0i64, 2];
        let dim_b = [1i64];
        let dims = [
            DimJoin {
                fact_keys: &fact_a,
                dim_keys: &dim_a,
            },
            DimJoin {
                fact_keys: &fact_b,
                dim_keys: &dim_b,
            },
        ];
        let sj = multiway_star_join_timed(3, &dims, None, &mut StageTimes::new()).unwrap();
        assert_eq!(sj.fact_rows(), &[0]);
        assert_eq!(sj.matches()[0].matrix().col_idx(), &[0]);

        let empty: [i64; 0] = [];
        let dims = [
            DimJoin {
                fact_keys: &fact_a,
                dim_keys: &dim_a,
            },
            DimJoin {
                fact_keys: &fact_b,
                dim_keys: &empty,
            },
        ];
        let sj = multiway_star_join_timed(3, &dims, None, &mut StageTimes::new()).unwrap();
        assert_eq!(sj.target_rows(), 0);
        assert!(sj.matches().iter().all(|m| m.nnz() == 0));
    }

    #[test]
    fn star_join_with_cache_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let fa: Vec<i64> = (0..200).map(|_| rng.gen_range(0..60)).collect();
        let fb: Vec<i64> = (0..200).map(|_| rng.gen_range(0..30)).collect();
        let da: Vec<i64> = (0..50).collect();
        let db: Vec<i64> = (0..30).rev().collect();
        let dims = [
            DimJoin {
                fact_keys: &fa,
                dim_keys: &da,
            },
            DimJoin {
                fact_keys: &fb,
                dim_keys: &db,
            },
        ];
        let plain = multiway_star_join_timed(200, &dims, None, &mut StageTimes::new()).unwrap();
        let mut cache = DomainCache::warm(&dims).unwrap();
        for _ in 0..2 {
            let cached =
                multiway_star_join_timed(200, &dims, Some(&mut cache), &mut StageTimes::new())
                    .unwrap();
            assert_eq!(cached, plain);
        }
        assert!(cache.get(0).unwrap().contains(59));
    }

    #[test]
    fn materialize_single_identity_and_errors() {
        let b = DenseMat::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let i = SparseCsr::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 1.0)]).unwrap();
        let m = build_column_map(2, &[(0, 0), (1, 1)]).unwrap();
        let t = materialize(
            std::slice::from_ref(&i),
            std::slice::from_ref(&b),
            std::slice::from_ref(&m),
        )
        .unwrap();
        assert_eq!(t, b.gather_rows(&[2, 0]).unwrap());

        let empty = SparseCsr::zeros(0, 3);
        assert_eq!(
            materialize(&[empty], std::slice::from_ref(&b), std::slice::from_ref(&m))
                .unwrap()
                .shape(),
            (0, 2)
        );

        let overlap = ColumnMap::placement(2, 2, &[(0, 0)]).unwrap();
        assert!(matches!(
            materialize(&[i.clone(), i], &[b.clone(), b], &[m, overlap]),
            Err(Error::Mapping(_))
        ));
    }
}
