use std::sync::Arc;

use crate::error::shape_err;
use crate::fusion::{check_layout, sum_row_maps};
use crate::laqops::ColumnMap;
use crate::matrix::{DenseMat, SparseCsr};
use crate::mlops::LinearOperator;
use crate::Result;

/// Pre-fused linear model: `partials[j] = B_j · (M_j · L)`.
#[derive(Debug, Clone)]
pub struct FusedLinear {
    partials: Vec<Arc<DenseMat>>,
    blocks: Vec<Arc<DenseMat>>,
    l: usize,
}

impl FusedLinear {
    pub fn partials(&self) -> &[Arc<DenseMat>] {
        &self.partials
    }

    pub fn output_width(&self) -> usize {
        self.l
    }

    /// Recomputes only dimension `dim`'s partial from its new table matrix.
    pub fn refresh_partial(&self, dim: usize, new_dim: &DenseMat) -> Result<FusedLinear> {
        let block = self
            .blocks
            .get(dim)
            .ok_or_else(|| shape_err!("dimension {dim} of {}", self.blocks.len()))?;
        if new_dim.cols() != block.rows() {
            return Err(shape_err!(
                "dimension {dim} had {} columns, got {}",
                block.rows(),
                new_dim.cols()
            ));
        }
        let mut partials = self.partials.clone();
        partials[dim] = Arc::new(new_dim.matmul(block)?);
        Ok(FusedLinear {
            partials,
            blocks: self.blocks.clone(),
            l: self.l,
        })
    }
}

/// `M_j · L`: row `s` is the row of `L` for the target column that source
/// column `s` feeds, or zeros if `s` is not mapped.
fn placed_block(m: &ColumnMap, l: &LinearOperator) -> DenseMat {
    let width = l.output_width();
    let mut block = DenseMat::zeros(m.source_cols(), width);
    for (s, t) in m.pairs() {
        block.row_mut(s).copy_from_slice(l.matrix().row(t));
    }
    block
}

pub fn prefuse_linear(
    dims: &[DenseMat],
    col_maps: &[ColumnMap],
    l: &LinearOperator,
) -> Result<FusedLinear> {
    check_layout(dims, col_maps, l.input_width())?;
    let mut partials = Vec::with_capacity(dims.len());
    let mut blocks = Vec::with_capacity(dims.len());
    for (d, m) in dims.iter().zip(col_maps) {
        let block = placed_block(m, l);
        partials.push(Arc::new(d.matmul(&block)?));
        blocks.push(Arc::new(block));
    }
    Ok(FusedLinear {
        partials,
        blocks,
        l: l.output_width(),
    })
}

/// `Σ_j I_j · partials[j]`.
pub fn apply_fused_linear(i_maps: &[SparseCsr], f: &FusedLinear) -> Result<DenseMat> {
    sum_row_maps(i_maps, &f.partials, f.l)
}
