use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::matrix::DenseMat;
use crate::mlops::{LinearOperator, Node, TreeModel};
use crate::Result;

/// Random tree with `leaves` leaves whose splits read from a pool of
/// `min(p, k)` distinct input features. Subtrees split the leaf count in
/// half, so depth is `ceil(log2 leaves)`. Leaf `j` in pre-order gets label `j`.
pub fn gen_tree(k: usize, p: usize, leaves: usize, seed: u64) -> Result<TreeModel> {
    if leaves < 2 {
        return Err(Error::Gen(format!(
            "a tree needs at least 2 leaves, got {leaves}"
        )));
    }
    if k == 0 || p == 0 {
        return Err(Error::Gen(
            "input width and feature count must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = sample(&mut rng, k, p.min(k)).into_vec();
    let mut nodes = Vec::with_capacity(2 * leaves - 1);
    let mut next_label = 0i64;
    grow(&mut rng, &pool, leaves, &mut nodes, &mut next_label);
    TreeModel::new(nodes)
}

fn grow(
    rng: &mut ChaCha8Rng,
    pool: &[usize],
    leaves: usize,
    nodes: &mut Vec<Node>,
    label: &mut i64,
) -> usize {
    let id = nodes.len();
    if leaves == 1 {
        nodes.push(Node::Leaf { label: *label });
        *label += 1;
        return id;
    }
    nodes.push(Node::Leaf { label: -1 });
    let feature = pool[rng.gen_range(0..pool.len())];
    let threshold = rng.gen_range(0.05..0.95);
    let true_child = grow(rng, pool, leaves / 2, nodes, label);
    let false_child = grow(rng, pool, leaves - leaves / 2, nodes, label);
    nodes[id] = Node::Split {
        feature,
        threshold,
        true_child,
        false_child,
    };
    id
}

/// Dense `k x l` operator with weights uniform in `[-1, 1)`.
pub fn gen_linear(k: usize, l: usize, seed: u64) -> Result<LinearOperator> {
    if k == 0 || l == 0 {
        return Err(Error::Gen(format!("linear operator shape {k}x{l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinearOperator::new(DenseMat::new(
        k,
        l,
        (0..k * l).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlops::compile_tree;

    #[test]
    fn two_leaves_is_a_stump() {
        let t = gen_tree(16, 8, 2, 1).unwrap();
        assert_eq!((t.internal_count(), t.leaf_count()), (1, 2));
        assert!(matches!(gen_tree(16, 8, 1, 1), Err(Error::Gen(_))));
    }

    #[test]
    fn shape_and_determinism() {
        let t = gen_tree(128, 16, 100, 9).unwrap();
        assert_eq!(t.leaf_count(), 100);
        assert_eq!(t.depth(), 7);
        assert_eq!(t, gen_tree(128, 16, 100, 9).unwrap());
        let m = compile_tree(&t, 128).unwrap();
        let mut used = m.node_features().to_vec();
        used.sort_unstable();
        used.dedup();
        assert!(used.len() <= 16);
        assert_eq!(m.labels(), (0..100).collect::<Vec<i64>>().as_slice());

        let l = gen_linear(16, 2, 3).unwrap();
        assert_eq!((l.input_width(), l.output_width()), (16, 2));
        assert_eq!(l, gen_linear(16, 2, 3).unwrap());
        assert_ne!(l, gen_linear(16, 2, 4).unwrap());
        assert!(gen_linear(0, 2, 1).is_err());
    }
}
