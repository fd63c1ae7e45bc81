use std::sync::Arc;

use crate::error::{shape_err, Error};
use crate::fusion::{check_layout, sum_row_maps};
use crate::laqops::ColumnMap;
use crate::matrix::{DenseMat, SparseCsr};
use crate::mlops::{select_leaves, threshold_binary, TreeLA};
use crate::Result;

/// The internal nodes owned by one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBlock {
    /// Positions of the owned nodes in the full tree's node order.
    pub nodes: Vec<usize>,
    /// `k x p_j` feature selection restricted to the owned nodes.
    pub f: SparseCsr,
    pub v: Vec<f64>,
    /// The owned rows of `H`, `p_j x l`.
    pub h_rows: DenseMat,
}

/// A compiled tree with its nodes split by the dimension owning each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePartition {
    blocks: Vec<TreeBlock>,
    h: Vec<f64>,
    labels: Vec<i64>,
    node_count: usize,
}

impl TreePartition {
    pub fn blocks(&self) -> &[TreeBlock] {
        &self.blocks
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Puts the blocks' `H` rows back at their node positions.
    pub fn stacked_h(&self) -> DenseMat {
        let mut h = DenseMat::zeros(self.node_count, self.h.len());
        for b in &self.blocks {
            for (local, &q) in b.nodes.iter().enumerate() {
                h.row_mut(q).copy_from_slice(b.h_rows.row(local));
            }
        }
        h
    }
}

/// Splits the nodes of `m` by `ownership[feature]`, the dimension holding
/// each input feature.
pub fn partition_tree(
    m: &TreeLA,
    ownership: &[Option<usize>],
    dims: usize,
) -> Result<TreePartition> {
    let k = m.input_width();
    if ownership.len() != k {
        return Err(shape_err!(
            "ownership covers {} features, tree reads {k}",
            ownership.len()
        ));
    }
    let mut nodes: Vec<Vec<usize>> = vec![Vec::new(); dims];
    for (q, &feature) in m.node_features().iter().enumerate() {
        match ownership[feature] {
            Some(j) if j < dims => nodes[j].push(q),
            Some(j) => {
                return Err(Error::Mapping(format!(
                    "feature {feature} owned by missing dimension {j}"
                )))
            }
            None => {
                return Err(Error::Mapping(format!(
                    "feature {feature} has no owning dimension"
                )))
            }
        }
    }
    let l = m.leaf_count();
    let blocks = nodes
        .into_iter()
        .map(|owned| {
            let triplets: Vec<_> = owned
                .iter()
                .enumerate()
                .map(|(local, &q)| (m.node_features()[q], local, 1.0))
                .collect();
            let f = SparseCsr::from_triplets(k, owned.len(), &triplets)?;
            let v = owned.iter().map(|&q| m.v()[q]).collect();
            let mut h_rows = DenseMat::zeros(owned.len(), l);
            for (local, &q) in owned.iter().enumerate() {
                h_rows.row_mut(local).copy_from_slice(m.h_matrix().row(q));
            }
            Ok(TreeBlock {
                nodes: owned,
                f,
                v,
                h_rows,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TreePartition {
        blocks,
        h: m.h().to_vec(),
        labels: m.labels().to_vec(),
        node_count: m.node_count(),
    })
}

#[derive(Debug)]
struct LocalTree {
    mf: SparseCsr,
    v: Vec<f64>,
    h_rows: DenseMat,
}

impl LocalTree {
    fn scores(&self, dim: &DenseMat) -> Result<DenseMat> {
        if dim.cols() != self.mf.rows() {
            return Err(shape_err!(
                "dimension has {} columns, expected {}",
                dim.cols(),
                self.mf.rows()
            ));
        }
        if self.v.is_empty() {
            return Ok(DenseMat::zeros(dim.rows(), self.h_rows.cols()));
        }
        let selected = dim.mul_csr(&self.mf)?;
        threshold_binary(&selected, &self.v).spmm_dense(&self.h_rows)
    }
}

/// Pre-fused tree: `partials[j] = ((B_j · M_j · F_j) > v_j) · H_j`.
#[derive(Debug, Clone)]
pub struct FusedTree {
    partials: Vec<Arc<DenseMat>>,
    local: Vec<Arc<LocalTree>>,
    h: Vec<f64>,
    labels: Vec<i64>,
}

impl FusedTree {
    pub fn partials(&self) -> &[Arc<DenseMat>] {
        &self.partials
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Recomputes only dimension `dim`'s partial from its new table matrix.
    pub fn refresh_partial(&self, dim: usize, new_dim: &DenseMat) -> Result<FusedTree> {
        let local = self
            .local
            .get(dim)
            .ok_or_else(|| shape_err!("dimension {dim} of {}", self.local.len()))?;
        let mut partials = self.partials.clone();
        partials[dim] = Arc::new(local.scores(new_dim)?);
        Ok(FusedTree {
            partials,
            local: self.local.clone(),
            h: self.h.clone(),
            labels: self.labels.clone(),
        })
    }
}

pub fn prefuse_tree(
    dims: &[DenseMat],
    col_maps: &[ColumnMap],
    parts: &TreePartition,
) -> Result<FusedTree> {
    let k = parts.blocks.first().map_or(0, |b| b.f.rows());
    check_layout(dims, col_maps, k)?;
    if parts.blocks.len() != dims.len() {
        return Err(shape_err!(
            "partition has {} blocks for {} dimensions",
            parts.blocks.len(),
            dims.len()
        ));
    }
    let mut partials = Vec::with_capacity(dims.len());
    let mut local = Vec::with_capacity(dims.len());
    for (j, ((d, m), block)) in dims.iter().zip(col_maps).zip(&parts.blocks).enumerate() {
        for (feature, _, _) in block.f.triplets() {
            if m.source_of(feature).is_none() {
                return Err(Error::Mapping(format!(
                    "dimension {j} owns feature {feature} but does not supply it"
                )));
            }
        }
        let lt = LocalTree {
            mf: m.matrix().spmm(&block.f)?,
            v: block.v.clone(),
            h_rows: block.h_rows.clone(),
        };
        partials.push(Arc::new(lt.scores(d)?));
        local.push(Arc::new(lt));
    }
    Ok(FusedTree {
        partials,
        local,
        h: parts.h.clone(),
        labels: parts.labels.clone(),
    })
}

/// Labels from `(Σ_j I_j · partials[j]) == h`.
pub fn apply_fused_tree(i_maps: &[SparseCsr], f: &FusedTree) -> Result<Vec<i64>> {
    let scores = sum_row_maps(i_maps, &f.partials, f.h.len())?;
    select_leaves(&scores, &f.h, &f.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laqops::materialize;
    use crate::mlops::{compile_tree, predict_tree, Node, TreeModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(rng: &mut ChaCha8Rng, k: usize, depth: usize) -> TreeModel {
        let mut nodes = vec![Node::Leaf { label: 0 }];
        let mut frontier = vec![(0usize, 0usize)];
        while let Some((id, d)) = frontier.pop() {
            if d < depth && (d == 0 || rng.gen_bool(0.75)) {
                let t = nodes.len();
                nodes.push(Node::Leaf { label: 0 });
                nodes.push(Node::Leaf { label: 0 });
                nodes[id] = Node::Split {
                    feature: rng.gen_range(0..k),
                    threshold: rng.gen_range(0..4) as f64 / 4.0,
                    true_child: t,
                    false_child: t + 1,
                };
                frontier.push((t, d + 1));
                frontier.push((t + 1, d + 1));
            } else {
                nodes[id] = Node::Leaf {
                    label: rng.gen_range(0..50),
                };
            }
        }
        TreeModel::new(nodes).unwrap()
    }

    fn grid_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMat {
        DenseMat::new(
            r,
            c,
            (0..r * c)
                .map(|_| rng.gen_range(0..5) as f64 / 4.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_owner_gets_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let t = compile_tree(&random_tree(&mut rng, 4, 4), 4).unwrap();
        let parts = partition_tree(&t, &[Some(0); 4], 2).unwrap();
        assert_eq!(parts.blocks()[0].nodes.len(), t.node_count());
        assert!(parts.blocks()[1].nodes.is_empty());
        assert_eq!(&parts.stacked_h(), t.h_matrix());

        let b = grid_mat(&mut rng, 10, 4);
        let other = grid_mat(&mut rng, 3, 1);
        let maps = [
            ColumnMap::identity(4),
            ColumnMap::placement(1, 4, &[]).unwrap(),
        ];
        let fused = prefuse_tree(&[b.clone(), other], &maps, &parts).unwrap();
        let full = threshold_binary(&b.mul_csr(t.f()).unwrap(), t.v())
            .spmm_dense(t.h_matrix())
            .unwrap();
        assert_eq!(*fused.partials()[0], full);
        assert!(fused.partials()[1].data().iter().all(|&x| x == 0.0));

        let labels =
            apply_fused_tree(&[SparseCsr::identity(10), SparseCsr::zeros(10, 3)], &fused).unwrap();
        assert_eq!(labels, predict_tree(&b, &t).unwrap());
        assert!(
            apply_fused_tree(&[SparseCsr::zeros(0, 10), SparseCsr::zeros(0, 3)], &fused)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn unowned_feature_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let t = compile_tree(&random_tree(&mut rng, 3, 3), 3).unwrap();
        let used = t.node_features()[0];
        let mut own = vec![Some(0); 3];
        own[used] = None;
        assert!(matches!(
            partition_tree(&t, &own, 1),
            Err(Error::Mapping(_))
        ));
    }

    #[test]
    fn random_star_matches_non_fused() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        for _ in 0..15 {
            let widths = [
                rng.gen_range(1..4),
                rng.gen_range(1..4),
                rng.gen_range(1..4),
            ];
            let k: usize = widths.iter().sum();
            let rows = [
                rng.gen_range(1..20),
                rng.gen_range(1..20),
                rng.gen_range(1..20),
            ];
            let dims: Vec<DenseMat> = (0..3)
                .map(|j| grid_mat(&mut rng, rows[j], widths[j]))
                .collect();
            let mut own = Vec::new();
            let mut offset = 0;
            let maps: Vec<ColumnMap> = widths
                .iter()
                .enumerate()
                .map(|(j, &w)| {
                    own.extend(std::iter::repeat_n(Some(j), w));
                    let pairs: Vec<_> = (0..w).map(|s| (s, offset + s)).collect();
                    offset += w;
                    ColumnMap::placement(w, k, &pairs).unwrap()
                })
                .collect();
            let tree = compile_tree(&random_tree(&mut rng, k, 7), k).unwrap();
            let parts = partition_tree(&tree, &own, 3).unwrap();
            assert_eq!(&parts.stacked_h(), tree.h_matrix());

            let n = rng.gen_range(0..80);
            let i_maps: Vec<SparseCsr> = (0..3)
                .map(|j| {
                    let t: Vec<_> = (0..n)
                        .map(|r| (r, rng.gen_range(0..rows[j]), 1.0))
                        .collect();
                    SparseCsr::from_triplets(n, rows[j], &t).unwrap()
                })
                .collect();
            let fused =
                apply_fused_tree(&i_maps, &prefuse_tree(&dims, &maps, &parts).unwrap()).unwrap();
            let plain = predict_tree(&materialize(&i_maps, &dims, &maps).unwrap(), &tree).unwrap();
            assert_eq!(fused, plain);
        }
    }

    #[test]
    fn refresh_matches_full_prefuse() {
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        let tree = compile_tree(&random_tree(&mut rng, 4, 5), 4).unwrap();
        let own = [Some(0), Some(0), Some(1), Some(1)];
        let parts = partition_tree(&tree, &own, 2).unwrap();
        let maps = [
            ColumnMap::placement(2, 4, &[(0, 0), (1, 1)]).unwrap(),
            ColumnMap::placement(2, 4, &[(0, 2), (1, 3)]).unwrap(),
        ];
        let mut dims = vec![grid_mat(&mut rng, 6, 2), grid_mat(&mut rng, 7, 2)];
        let f = prefuse_tree(&dims, &maps, &parts).unwrap();
        dims[0] = grid_mat(&mut rng, 9, 2);
        let g = f.refresh_partial(0, &dims[0]).unwrap();
        assert!(Arc::ptr_eq(&g.partials()[1], &f.partials()[1]));
        let full = prefuse_tree(&dims, &maps, &parts).unwrap();
        assert!(g
            .partials()
            .iter()
            .zip(full.partials())
            .all(|(a, b)| **a == **b));
    }
}
