use std::fmt::Write as _;

use crate::error::{shape_err, Error};
use crate::matrix::{DenseMat, SparseCsr};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Goes to `true_child` when `x[feature] > threshold`.
    Split {
        feature: usize,
        threshold: f64,
        true_child: usize,
        false_child: usize,
    },
    Leaf {
        label: i64,
    },
}

/// Binary decision tree; node `i` has id `i` and the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

impl TreeModel {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Tree("tree has no nodes".into()));
        }
        let n = nodes.len();
        let mut parents = vec![0usize; n];
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Split {
                threshold,
                true_child,
                false_child,
                ..
            } = *node
            {
                if !threshold.is_finite() {
                    return Err(Error::Tree(format!("node {id} has threshold {threshold}")));
                }
                for c in [true_child, false_child] {
                    if c >= n {
                        return Err(Error::Tree(format!("node {id} points to missing node {c}")));
                    }
                    parents[c] += 1;
                }
            }
        }
        if parents[0] != 0 {
            return Err(Error::Tree("root node 0 has a parent".into()));
        }
        if let Some(id) = (1..n).find(|&id| parents[id] != 1) {
            return Err(Error::Tree(format!(
                "node {id} has {} parents",
                parents[id]
            )));
        }
        // With one parent per non-root node, reaching every node from the root
        // rules out cycles.
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Tree(format!("cycle through node {id}")));
            }
            if let Node::Split {
                true_child,
                false_child,
                ..
            } = nodes[id]
            {
                stack.push(true_child);
                stack.push(false_child);
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(Error::Tree(format!(
                "node {id} is unreachable from the root"
            )));
        }
        Ok(Self { nodes })
    }

    /// Parses the line format `N <id> <feature> <threshold> <true> <false>` /
    /// `L <id> <label>`. Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut slots: Vec<Option<Node>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Format {
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(format!("bad integer `{s}`")))
            };
            let (id, node) = match fields.as_slice() {
                ["N", id, feat, thr, t, f] => {
                    let threshold = thr
                        .parse::<f64>()
                        .map_err(|_| bad(format!("bad threshold `{thr}`")))?;
                    (
                        int(id)?,
                        Node::Split {
                            feature: int(feat)?,
                            threshold,
                            true_child: int(t)?,
                            false_child: int(f)?,
                        },
                    )
                }
                ["L", id, label] => {
                    let label = label
                        .parse::<i64>()
                        .map_err(|_| bad(format!("bad label `{label}`")))?;
                    (int(id)?, Node::Leaf { label })
                }
                _ => return Err(bad(format!("unrecognized node line `{line}`"))),
            };
            if slots.len() <= id {
                slots.resize(id + 1, None);
            }
            if slots[id].replace(node).is_some() {
                return Err(bad(format!("node {id} defined twice")));
            }
        }
        let nodes = slots
            .into_iter()
            .enumerate()
            .map(|(id, s)| s.ok_or_else(|| Error::Tree(format!("node {id} is missing"))))
            .collect::<Result<_>>()?;
        Self::new(nodes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    true_child,
                    false_child,
                } => writeln!(
                    out,
                    "N {id} {feature} {threshold:?} {true_child} {false_child}"
                ),
                Node::Leaf { label } => writeln!(out, "L {id} {label}"),
            }
            .expect("write to string");
        }
        out
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// Largest feature index used, if any node splits.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match self.nodes[id] {
                Node::Split {
                    true_child,
                    false_child,
                    ..
                } => {
                    stack.push((true_child, d + 1));
                    stack.push((false_child, d + 1));
                }
                Node::Leaf { .. } => best = best.max(d),
            }
        }
        best
    }
}

/// A tree in matrix form.
///
/// Internal nodes and leaves are numbered in pre-order (node, true subtree,
/// false subtree). `F` is `k x p` with one 1 per column at the node's
/// feature, `H` is `p x l` with +1/-1 where leaf `j`'s path takes the
/// true/false branch, and `h[j]` counts the +1 entries of column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeLA {
    f: SparseCsr,
    v: Vec<f64>,
    h_mat: DenseMat,
    h: Vec<f64>,
    labels: Vec<i64>,
    node_features: Vec<usize>,
}

impl TreeLA {
    pub fn f(&self) -> &SparseCsr {
        &self.f
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn h_matrix(&self) -> &DenseMat {
        &self.h_mat
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Feature read by each internal node, in node order.
    pub fn node_features(&self) -> &[usize] {
        &self.node_features
    }

    pub fn input_width(&self) -> usize {
        self.f.rows()
    }

    /// Number of internal nodes `p`.
    pub fn node_count(&self) -> usize {
        self.v.len()
    }

    /// Number of leaves `l`.
    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }
}

pub fn compile_tree(t: &TreeModel, input_width: usize) -> Result<TreeLA> {
    if let Some(f) = t.max_feature().filter(|&f| f >= input_width) {
        return Err(Error::Tree(format!(
            "feature {f} outside input width {input_width}"
        )));
    }
    let mut node_features = Vec::new();
    let mut v = Vec::new();
    let mut labels = Vec::new();
    // Path of each leaf as (node position, took true branch).
    let mut paths: Vec<Vec<(usize, bool)>> = Vec::new();

    let mut stack: Vec<(usize, Vec<(usize, bool)>)> = vec![(0, Vec::new())];
    while let Some((id, path)) = stack.pop() {
        match t.nodes[id] {
            Node::Split {
                feature,
                threshold,
                true_child,
                false_child,
            } => {
                let q = v.len();
                node_features.push(feature);
                v.push(threshold);
                let mut f_path = path.clone();
                f_path.push((q, false));
                let mut t_path = path;
                t_path.push((q, true));
                stack.push((false_child, f_path));
                stack.push((true_child, t_path));
            }
            Node::Leaf { label } => {
                labels.push(label);
                paths.push(path);
            }
        }
    }

    let p = v.len();
    let l = labels.len();
    let f_triplets: Vec<(usize, usize, f64)> = node_features
        .iter()
        .enumerate()
        .map(|(q, &x)| (x, q, 1.0))
        .collect();
    let f = SparseCsr::from_triplets(input_width, p, &f_triplets)?;
    let mut h_mat = DenseMat::zeros(p, l);
    let mut h = vec![0.0; l];
    for (j, path) in paths.iter().enumerate() {
        for &(q, took_true) in path {
            h_mat.row_mut(q)[j] = if took_true { 1.0 } else { -1.0 };
            if took_true {
                h[j] += 1.0;
            }
        }
    }
    Ok(TreeLA {
        f,
        v,
        h_mat,
        h,
        labels,
        node_features,
    })
}

/// `(x > v)` per column, as a binary sparse matrix.
pub(crate) fn threshold_binary(x: &DenseMat, v: &[f64]) -> SparseCsr {
    debug_assert_eq!(x.cols(), v.len());
    let mut row_ptr = Vec::with_capacity(x.rows() + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for row in x.row_iter() {
        col_idx.extend(
            row.iter()
                .zip(v)
                .enumerate()
                .filter(|(_, (a, t))| a > t)
                .map(|(q, _)| q),
        );
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    SparseCsr::from_parts_unchecked(x.rows(), x.cols(), row_ptr, col_idx, vec![1.0; nnz])
}

/// Picks, per row of `scores`, the label of the single column equal to `h`.
pub(crate) fn select_leaves(scores: &DenseMat, h: &[f64], labels: &[i64]) -> Result<Vec<i64>> {
    debug_assert_eq!(scores.cols(), h.len());
    scores
        .row_iter()
        .enumerate()
        .map(|(r, row)| {
            let mut hit = None;
            for (j, (&s, &target)) in row.iter().zip(h).enumerate() {
                if s == target {
                    if hit.is_some() {
                        return Err(Error::Model(format!("row {r} matches several leaves")));
                    }
                    hit = Some(j);
                }
            }
            hit.map(|j| labels[j])
                .ok_or_else(|| Error::Model(format!("row {r} matches no leaf")))
        })
        .collect()
}

/// Labels for each row of `t` via `((t·F > v)·H) == h`.
pub fn predict_tree(t: &DenseMat, m: &TreeLA) -> Result<Vec<i64>> {
    if t.cols() != m.input_width() {
        return Err(shape_err!(
            "input has {} columns, tree expects {}",
            t.cols(),
            m.input_width()
        ));
    }
    let selected = t.mul_csr(&m.f)?;
    let b = threshold_binary(&selected, &m.v);
    let scores = b.spmm_dense(&m.h_mat)?;
    select_leaves(&scores, &m.h, &m.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn split(feature: usize, threshold: f64, t: usize, f: usize) -> Node {
        Node::Split {
            feature,
            threshold,
            true_child: t,
            false_child: f,
        }
    }

    fn walk(t: &TreeModel, x: &[f64]) -> i64 {
        let mut id = 0;
        loop {
            match t.nodes()[id] {
                Node::Split {
                    feature,
                    threshold,
                    true_child,
                    false_child,
                } => {
                    id = if x[feature] > threshold {
                        true_child
                    } else {
                        false_child
                    }
                }
                Node::Leaf { label } => return label,
            }
        }
    }

    fn random_tree(rng: &mut ChaCha8Rng, k: usize, max_depth: usize) -> TreeModel {
        let mut nodes = vec![Node::Leaf { label: 0 }];
        let mut frontier = vec![(0usize, 0usize)];
        while let Some((id, d)) = frontier.pop() {
            if d < max_depth && (d == 0 || rng.gen_bool(0.7)) {
                let t = nodes.len();
                nodes.push(Node::Leaf { label: 0 });
                nodes.push(Node::Leaf { label: 0 });
                let thr = (rng.gen_range(0..8) as f64) / 8.0;
                nodes[id] = split(rng.gen_range(0..k), thr, t, t + 1);
                frontier.push((t, d + 1));
                frontier.push((t + 1, d + 1));
            } else {
                nodes[id] = Node::Leaf {
                    label: rng.gen_range(0..1000),
                };
            }
        }
        TreeModel::new(nodes).unwrap()
    }

    #[test]
    fn single_split() {
        let t = TreeModel::new(vec![
            split(0, 0.5, 1, 2),
            Node::Leaf { label: 7 },
            Node::Leaf { label: 9 },
        ])
        .unwrap();
        let m = compile_tree(&t, 1).unwrap();
        assert_eq!((m.node_count(), m.leaf_count()), (1, 2));
        assert_eq!(m.h_matrix(), &DenseMat::from_rows(&[[1.0, -1.0]]).unwrap());
        assert_eq!(m.h(), &[1.0, 0.0]);
        let x = DenseMat::from_rows(&[[0.9], [0.5], [0.1]]).unwrap();
        assert_eq!(predict_tree(&x, &m).unwrap(), vec![7, 9, 9]);
    }

    #[test]
    fn two_false_branches_give_zero_score() {
        // F1 false then F2 false reaches L2.
        let t = TreeModel::new(vec![
            split(0, 0.5, 1, 2),
            Node::Leaf { label: 1 },
            split(1, 0.5, 3, 4),
            Node::Leaf { label: 3 },
            Node::Leaf { label: 2 },
        ])
        .unwrap();
        let m = compile_tree(&t, 2).unwrap();
        let l2 = m.labels().iter().position(|&x| x == 2).unwrap();
        assert_eq!(m.h_matrix().column(l2), vec![-1.0, -1.0]);
        assert_eq!(m.h()[l2], 0.0);
        let col_sum: f64 = m.h_matrix().column(l2).iter().sum();
        assert_eq!(col_sum, -2.0);
        assert_eq!(
            predict_tree(&DenseMat::from_rows(&[[0.1, 0.2]]).unwrap(), &m).unwrap(),
            vec![2]
        );
    }

    #[test]
    fn leaf_only_tree() {
        let t = TreeModel::new(vec![Node::Leaf { label: 4 }]).unwrap();
        let m = compile_tree(&t, 3).unwrap();
        assert_eq!(
            predict_tree(&DenseMat::zeros(2, 3), &m).unwrap(),
            vec![4, 4]
        );
    }

    #[test]
    fn malformed_trees() {
        let leaf = Node::Leaf { label: 0 };
        assert!(matches!(TreeModel::new(vec![]), Err(Error::Tree(_))));
        assert!(matches!(
            TreeModel::new(vec![split(0, 1.0, 1, 5), leaf, leaf]),
            Err(Error::Tree(_))
        ));
        assert!(matches!(
            TreeModel::new(vec![split(0, 1.0, 1, 1), leaf]),
            Err(Error::Tree(_))
        ));
        assert!(matches!(
            TreeModel::new(vec![split(0, 1.0, 0, 1), leaf]),
            Err(Error::Tree(_))
        ));
        assert!(matches!(
            TreeModel::new(vec![leaf, leaf]),
            Err(Error::Tree(_))
        ));
        let ok = TreeModel::new(vec![split(3, 1.0, 1, 2), leaf, leaf]).unwrap();
        assert!(matches!(compile_tree(&ok, 3), Err(Error::Tree(_))));
        assert!(matches!(
            predict_tree(&DenseMat::zeros(1, 2), &compile_tree(&ok, 4).unwrap()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn text_round_trip_and_parse_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let t = random_tree(&mut rng, 6, 5);
        assert_eq!(TreeModel::parse(&t.to_text()).unwrap(), t);
        assert!(matches!(
            TreeModel::parse("N 0 0 x 1 2\n"),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(
            TreeModel::parse("L 0 1\nL 0 2\n"),
            Err(Error::Format { line: 2, .. })
        ));
        assert!(matches!(
            TreeModel::parse("N 0 0 0.5 1 2\nL 1 1\n"),
            Err(Error::Tree(_))
        ));
        assert_eq!(
            TreeModel::parse("# stump\nL 2 5\n\nN 0 1 0.25 2 1\nL 1 6\n")
                .unwrap()
                .leaf_count(),
            2
        );
    }

    #[test]
    fn f_columns_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 40, 6);
            let m = compile_tree(&t, 40).unwrap();
            let ft = m.f().transpose();
            assert!((0..ft.rows()).all(|q| ft.row(q).0.len() == 1 && ft.row(q).1 == [1.0]));
            let ff = ft.spmm(m.f()).unwrap();
            let distinct = {
                let mut f = m.node_features().to_vec();
                f.sort_unstable();
                f.dedup();
                f.len() == m.node_count()
            };
            if distinct {
                assert_eq!(ff, SparseCsr::identity(m.node_count()));
            }
            let hc: Vec<f64> = (0..m.leaf_count())
                .map(|j| m.h_matrix().column(j).iter().filter(|&&x| x == 1.0).count() as f64)
                .collect();
            assert_eq!(hc, m.h());
        }
    }

    #[test]
    fn random_trees_match_traversal_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..40 {
            let k = rng.gen_range(1..20);
            let t = random_tree(&mut rng, k, 8);
            let m = compile_tree(&t, k).unwrap();
            // Grid values hit thresholds exactly on a good share of inputs.
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..k).map(|_| rng.gen_range(0..9) as f64 / 8.0).collect())
                .collect();
            let x = DenseMat::from_rows(&rows).unwrap();
            let want: Vec<i64> = rows.iter().map(|r| walk(&t, r)).collect();
            assert_eq!(predict_tree(&x, &m).unwrap(), want);
        }
    }

    proptest! {
        #[test]
        fn exactly_one_leaf_matches(seed in any::<u64>(), x in proptest::collection::vec(0.0f64..1.0, 8)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, 8, 6);
            let m = compile_tree(&t, 8).unwrap();
            let row = DenseMat::from_rows(std::slice::from_ref(&x)).unwrap();
            let b = threshold_binary(&row.mul_csr(m.f()).unwrap(), m.v());
            let scores = b.spmm_dense(m.h_matrix()).unwrap();
            let hits = scores.row(0).iter().zip(m.h()).filter(|(s, h)| s == h).count();
            prop_assert_eq!(hits, 1);
            prop_assert_eq!(predict_tree(&row, &m).unwrap(), vec![walk(&t, &x)]);
        }
    }
}
