//! Model inference as matrix operations.
//!
//! A linear model is a dense `k x l` operator. A decision tree is compiled
//! into a feature-selection matrix `F`, a threshold vector `v`, a path matrix
//! `H` and a path-score vector `h`, so that the leaf of each input row is the
//! column where `((T·F > v)·H) == h`.

mod linear;
mod tree;

pub use linear::{predict_linear, LinearOperator};
pub use tree::{compile_tree, predict_tree, Node, TreeLA, TreeModel};

pub(crate) use tree::{select_leaves, threshold_binary};

/// A model applied after the join.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearOperator),
    Tree(TreeModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Tree(_) => "tree",
        }
    }
}
