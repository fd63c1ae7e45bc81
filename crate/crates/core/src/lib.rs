//! Linear-algebra query processing for star schemas.
//!
//! Relational operators (projection, selection, equi-join, group-by, sort) are
//! evaluated as sparse and dense matrix products, and downstream ML operators
//! (linear maps, tensorized decision trees) can be pushed through the join
//! into the dimension tables. The [`fusion`] module holds the pre-fused
//! partial results and the cost model that decides when pushing down pays off.

pub mod benchgen;
pub mod cli;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod laqops;
pub mod matrix;
pub mod mlops;
pub mod oracle;
pub mod report;
pub mod storage;
pub mod timing;

pub use error::{Error, Result};
pub use matrix::{DenseMat, SparseCoo, SparseCsr};
