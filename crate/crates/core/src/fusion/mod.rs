//! Pushing model operators through the star join.
//!
//! Instead of materializing `T = Σ I_j B_j M_j` and then applying the model,
//! each dimension table is combined with its share of the model ahead of
//! time. The per-dimension partials are kept behind `Arc`s so refreshing one
//! dimension leaves the others' storage untouched.

mod cost;
mod linear;
mod tree;

pub use cost::{
    decide_fusion, speedup_ratio_linear, speedup_ratio_tree, CostInputs, DEFAULT_THRESHOLD,
};
pub use linear::{apply_fused_linear, prefuse_linear, FusedLinear};
pub use tree::{
    apply_fused_tree, partition_tree, prefuse_tree, FusedTree, TreeBlock, TreePartition,
};

use std::collections::HashSet;

use crate::error::{shape_err, Error};
use crate::laqops::ColumnMap;
use crate::matrix::{DenseMat, SparseCsr};
use crate::Result;

/// Checks that every dimension has a column map and that the maps target
/// disjoint columns of a `k`-wide layout.
fn check_layout(dims: &[DenseMat], col_maps: &[ColumnMap], k: usize) -> Result<()> {
    if dims.len() != col_maps.len() {
        return Err(shape_err!(
            "{} dimension matrices but {} column maps",
            dims.len(),
            col_maps.len()
        ));
    }
    let mut used = HashSet::new();
    for (j, (d, m)) in dims.iter().zip(col_maps).enumerate() {
        if d.cols() != m.source_cols() {
            return Err(shape_err!(
                "dimension {j} has {} columns, map expects {}",
                d.cols(),
                m.source_cols()
            ));
        }
        if m.target_cols() != k {
            return Err(shape_err!(
                "dimension {j} maps into {} columns, model expects {k}",
                m.target_cols()
            ));
        }
        for t in m.targets() {
            if !used.insert(t) {
                return Err(Error::Mapping(format!(
                    "target column {t} filled by two dimensions"
                )));
            }
        }
    }
    Ok(())
}

/// `Σ_j I_j · P_j` with all `I_j` sharing a row count.
fn sum_row_maps(
    i_maps: &[SparseCsr],
    partials: &[std::sync::Arc<DenseMat>],
    width: usize,
) -> Result<DenseMat> {
    if i_maps.len() != partials.len() {
        return Err(shape_err!(
            "{} row maps for {} partials",
            i_maps.len(),
            partials.len()
        ));
    }
    let rows = i_maps.first().map_or(0, SparseCsr::rows);
    if let Some(m) = i_maps.iter().find(|m| m.rows() != rows) {
        return Err(shape_err!("row maps have {rows} and {} rows", m.rows()));
    }
    let mut out = DenseMat::zeros(rows, width);
    for (i, p) in i_maps.iter().zip(partials) {
        i.spmm_dense_acc(p, &mut out)?;
    }
    Ok(out)
}
