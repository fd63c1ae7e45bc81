//! Relational operators expressed as linear algebra.
//!
//! Projection multiplies by a one-hot column map, selection gathers rows
//! under a boolean mask, equi-joins multiply one-hot key matrices over a
//! shared key domain, and single-column group-by multiplies a valued key
//! matrix by a group matrix before a ones-vector reduction.

mod aggregate;
mod domain;
mod join;
mod projection;
mod selection;
mod sort;

pub use aggregate::{groupby_count_single, groupby_sum_multi, groupby_sum_single, GroupMap};
pub use domain::{build_key_domain, key_matrix, update_key_domain, KeyDomain, Orientation};
pub use join::{
    materialize, mm_join, mm_join_in_domain, multiway_star_join, multiway_star_join_timed,
    row_mapping_matrices, DimJoin, DomainCache, RowMatch, StarJoin,
};
pub use projection::{build_column_map, project, ColumnMap};
pub use selection::{
    apply_mask, build_selection_mask, MaskSelect, Predicate, Scalar, SelectionMask,
};
pub use sort::{sort_result_rows, sort_rows, ResultRow, SortDirection, SortKey};
