use std::collections::HashMap;

use crate::error::{shape_err, Error};
use crate::matrix::SparseCsr;
use crate::Result;

/// Keys no larger than this multiple of the domain size get a direct-address
/// index instead of a hash map.
const DENSE_INDEX_SLACK: usize = 4;
const DENSE_INDEX_MIN: usize = 1 << 12;

#[derive(Debug, Clone)]
enum KeyIndex {
    Dense(Vec<u32>),
    Hash(HashMap<i64, u32>),
}

/// Sorted, distinct union of join keys plus a key → position index.
///
/// Positions are the column space of the one-hot key matrices, so keeping the
/// domain ascending also orders those columns by key.
#[derive(Debug, Clone)]
pub struct KeyDomain {
    sorted_keys: Vec<i64>,
    index: KeyIndex,
}

impl PartialEq for KeyDomain {
    fn eq(&self, other: &Self) -> bool {
        self.sorted_keys == other.sorted_keys
    }
}

impl KeyDomain {
    fn from_sorted(sorted_keys: Vec<i64>) -> Result<Self> {
        if sorted_keys.len() >= u32::MAX as usize {
            return Err(Error::Capacity(format!(
                "{} distinct keys",
                sorted_keys.len()
            )));
        }
        let max = sorted_keys.last().copied().unwrap_or(0) as usize;
        let index = if max < sorted_keys.len() * DENSE_INDEX_SLACK + DENSE_INDEX_MIN {
            let mut slots = vec![u32::MAX; max + 1];
            for (p, &k) in sorted_keys.iter().enumerate() {
                slots[k as usize] = p as u32;
            }
            KeyIndex::Dense(slots)
        } else {
            KeyIndex::Hash(
                sorted_keys
                    .iter()
                    .enumerate()
                    .map(|(p, &k)| (k, p as u32))
                    .collect(),
            )
        };
        Ok(Self { sorted_keys, index })
    }

    pub fn empty() -> Self {
        Self {
            sorted_keys: Vec::new(),
            index: KeyIndex::Dense(Vec::new()),
        }
    }

    pub fn keys(&self) -> &[i64] {
        &self.sorted_keys
    }

    pub fn len(&self) -> usize {
        self.sorted_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_keys.is_empty()
    }

    #[inline]
    pub fn position(&self, key: i64) -> Option<usize> {
        match &self.index {
            KeyIndex::Dense(slots) => {
                let p = *slots.get(usize::try_from(key).ok()?)?;
                (p != u32::MAX).then_some(p as usize)
            }
            KeyIndex::Hash(map) => map.get(&key).map(|&p| p as usize),
        }
    }

    pub fn contains(&self, key: i64) -> bool {
        self.position(key).is_some()
    }
}

fn check_non_negative(keys: &[i64]) -> Result<()> {
    match keys.iter().find(|&&k| k < 0) {
        Some(k) => Err(Error::Domain(format!("negative key {k}"))),
        None => Ok(()),
    }
}

/// Sorted distinct keys of `keys`.
fn distinct_sorted(keys: &[&[i64]]) -> Vec<i64> {
    let n: usize = keys.iter().map(|k| k.len()).sum();
    let max = keys.iter().flat_map(|k| k.iter()).copied().max();
    let Some(max) = max else { return Vec::new() };
    let max = max as usize;
    if max < n * DENSE_INDEX_SLACK + DENSE_INDEX_MIN {
        // presence bitmap, then one ascending scan
        let mut seen = vec![false; max + 1];
        for ks in keys {
            for &k in *ks {
                seen[k as usize] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(k, &s)| s.then_some(k as i64))
            .collect()
    } else {
        let mut all: Vec<i64> = keys.iter().flat_map(|k| k.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

/// Distinct union of two key arrays, always ascending.
pub fn build_key_domain(keys_r: &[i64], keys_s: &[i64]) -> Result<KeyDomain> {
    check_non_negative(keys_r)?;
    check_non_negative(keys_s)?;
    KeyDomain::from_sorted(distinct_sorted(&[keys_r, keys_s]))
}

/// Extends a cached domain with `new_keys`. Only keys missing from the domain
/// are sorted; they are then merged into the existing sorted array.
pub fn update_key_domain(d: &KeyDomain, new_keys: &[i64]) -> Result<KeyDomain> {
    check_non_negative(new_keys)?;
    let mut fresh: Vec<i64> = new_keys
        .iter()
        .copied()
        .filter(|&k| !d.contains(k))
        .collect();
    if fresh.is_empty() {
        return Ok(d.clone());
    }
    fresh.sort_unstable();
    fresh.dedup();
    let old = &d.sorted_keys;
    let mut merged = Vec::with_capacity(old.len() + fresh.len());
    let (mut i, mut j) = (0, 0);
    while i < old.len() && j < fresh.len() {
        if old[i] < fresh[j] {
            merged.push(old[i]);
            i += 1;
        } else {
            merged.push(fresh[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&old[i..]);
    merged.extend_from_slice(&fresh[j..]);
    KeyDomain::from_sorted(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `rows x |domain|`: one entry per input row at its key's position.
    RowsByDomain,
    /// `|domain| x rows`: the transpose of [`Orientation::RowsByDomain`].
    DomainByRows,
}

/// One-hot (or valued) key matrix over `domain`. With `values`, row `i`
/// carries `values[i]` instead of 1; zero values are not stored.
pub fn key_matrix(
    keys: &[i64],
    domain: &KeyDomain,
    orientation: Orientation,
    values: Option<&[f64]>,
) -> Result<SparseCsr> {
    if let Some(v) = values {
        if v.len() != keys.len() {
            return Err(shape_err!("{} keys but {} values", keys.len(), v.len()));
        }
    }
    let positions: Vec<usize> = keys
        .iter()
        .map(|&k| {
            domain
                .position(k)
                .ok_or_else(|| Error::Domain(format!("key {k} not in domain")))
        })
        .collect::<Result<_>>()?;
    let vals = values.map_or_else(|| vec![1.0; keys.len()], <[f64]>::to_vec);
    match orientation {
        Orientation::RowsByDomain => Ok(SparseCsr::one_per_row(domain.len(), positions, vals)),
        Orientation::DomainByRows => {
            let d = domain.len();
            let mut row_ptr = vec![0usize; d + 1];
            for (&p, &v) in positions.iter().zip(&vals) {
                if v != 0.0 {
                    row_ptr[p + 1] += 1;
                }
            }
            for p in 0..d {
                row_ptr[p + 1] += row_ptr[p];
            }
            let nnz = row_ptr[d];
            let mut next = row_ptr.clone();
            let mut col_idx = vec![0usize; nnz];
            let mut out_vals = vec![0.0; nnz];
            for (row, (&p, &v)) in positions.iter().zip(&vals).enumerate() {
                if v != 0.0 {
                    col_idx[next[p]] = row;
                    out_vals[next[p]] = v;
                    next[p] += 1;
                }
            }
            Ok(SparseCsr::from_parts_unchecked(
                d,
                keys.len(),
                row_ptr,
                col_idx,
                out_vals,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_example_domain() {
        let d = build_key_domain(&[1, 0, 4, 2, 3], &[2, 3, 0, 4, 7]).unwrap();
        assert_eq!(d.keys(), &[0, 1, 2, 3, 4, 7]);
    }

    #[test]
    fn identical_and_disjoint_inputs() {
        let d = build_key_domain(&[5, 3, 5, 1], &[1, 3, 5, 5]).unwrap();
        assert_eq!(d.keys(), &[1, 3, 5]);
        let d = build_key_domain(&[1, 1, 2], &[10, 11, 11]).unwrap();
        assert_eq!(d.len(), 2 + 2);
    }

    #[test]
    fn sparse_keys_use_hash_index() {
        let big = 1i64 << 40;
        let d = build_key_domain(&[big, 3], &[big + 1, 3]).unwrap();
        assert_eq!(d.keys(), &[3, big, big + 1]);
        assert!(matches!(d.index, KeyIndex::Hash(_)));
        assert_eq!(d.position(big + 1), Some(2));
        assert_eq!(d.position(4), None);
    }

    #[test]
    fn negative_keys_rejected() {
        assert!(matches!(
            build_key_domain(&[-1], &[]),
            Err(Error::Domain(_))
        ));
        assert!(update_key_domain(&KeyDomain::empty(), &[-2]).is_err());
    }

    #[test]
    fn updates() {
        let d = build_key_domain(&[0, 2], &[]).unwrap();
        assert_eq!(update_key_domain(&d, &[2, 0, 0]).unwrap(), d);
        assert_eq!(update_key_domain(&d, &[1]).unwrap().keys(), &[0, 1, 2]);
    }

    #[test]
    fn random_incremental_updates_match_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut all = Vec::new();
        let mut d = KeyDomain::empty();
        for _ in 0..50 {
            let hi = if rng.gen_bool(0.2) { 1i64 << 35 } else { 500 };
            let batch: Vec<i64> = (0..rng.gen_range(0..40))
                .map(|_| rng.gen_range(0..hi))
                .collect();
            all.extend_from_slice(&batch);
            d = update_key_domain(&d, &batch).unwrap();
            let rebuilt = build_key_domain(&all, &[]).unwrap();
            assert_eq!(d, rebuilt);
            for &k in &all {
                assert_eq!(d.position(k), rebuilt.position(k));
            }
        }
    }

    #[test]
    fn key_matrix_positions() {
        let d = build_key_domain(&[1, 0, 4, 2, 3], &[2, 3, 0, 4, 7]).unwrap();
        let m = key_matrix(&[2, 3, 0, 4, 7], &d, Orientation::RowsByDomain, None).unwrap();
        assert_eq!(m.shape(), (5, 6));
        assert_eq!(m.col_idx(), &[2, 3, 0, 4, 5]);
        assert!(m.values().iter().all(|&v| v == 1.0));
        let t = key_matrix(&[2, 3, 0, 4, 7], &d, Orientation::DomainByRows, None).unwrap();
        assert_eq!(t, m.transpose());
    }

    #[test]
    fn key_matrix_small_cases() {
        let d = build_key_domain(&[9], &[]).unwrap();
        let m = key_matrix(&[9], &d, Orientation::RowsByDomain, None).unwrap();
        assert_eq!(m.to_dense().data(), &[1.0]);

        let d = build_key_domain(&[3, 8], &[]).unwrap();
        let m = key_matrix(&[8, 3], &d, Orientation::RowsByDomain, Some(&[10.0, 20.0])).unwrap();
        assert_eq!(
            m.triplets().collect::<Vec<_>>(),
            vec![(0, 1, 10.0), (1, 0, 20.0)]
        );
        assert!(matches!(
            key_matrix(&[4], &d, Orientation::RowsByDomain, None),
            Err(Error::Domain(_))
        ));
        assert!(key_matrix(&[3], &d, Orientation::RowsByDomain, Some(&[])).is_err());
    }

    proptest! {
        #[test]
        fn build_equals_incremental(a in prop::collection::vec(0i64..300, 0..60), b in prop::collection::vec(0i64..300, 0..60)) {
            let direct = build_key_domain(&a, &b).unwrap();
            let inc = update_key_domain(&build_key_domain(&a, &[]).unwrap(), &b).unwrap();
            prop_assert_eq!(&direct, &inc);
            prop_assert!(direct.keys().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
