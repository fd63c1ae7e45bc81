//! Dense and sparse matrix types plus the multiplication kernels the rest of
//! the engine is built on.
//!
//! All sparse constructors emit canonical form: row-major, strictly
//! increasing column indices within a row, no explicit zeros. Kernels are
//! single-threaded and deterministic for a fixed input.

mod coo;
mod csr;
mod dense;

pub use coo::SparseCoo;
pub use csr::SparseCsr;
pub use dense::DenseMat;

use crate::Result;

/// `a · b` for two CSR operands.
pub fn spmm(a: &SparseCsr, b: &SparseCsr) -> Result<SparseCsr> {
    a.spmm(b)
}

/// `a · b` with a sparse left operand and a dense right operand.
pub fn spmm_dense(a: &SparseCsr, b: &DenseMat) -> Result<DenseMat> {
    a.spmm_dense(b)
}

pub fn dense_matmul(a: &DenseMat, b: &DenseMat) -> Result<DenseMat> {
    a.matmul(b)
}

pub fn transpose(a: &SparseCsr) -> SparseCsr {
    a.transpose()
}

pub fn coo_from_csr(a: &SparseCsr) -> SparseCoo {
    a.to_coo()
}

pub fn csr_from_triplets(
    rows: usize,
    cols: usize,
    triplets: &[(usize, usize, f64)],
) -> Result<SparseCsr> {
    SparseCsr::from_triplets(rows, cols, triplets)
}
