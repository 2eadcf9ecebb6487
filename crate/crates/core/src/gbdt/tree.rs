use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::{Growth, TrainParams};

/// Regression tree node. Rows with `value <= threshold` go left; missing
/// values follow `default_left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: String,
        feature_index: usize,
        threshold: f64,
        default_left: bool,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    pub fn leaf(weight: f64) -> Self {
        TreeNode::Leaf { weight }
    }

    /// Leaf weight reached by a schema-ordered row.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    node = if goes_left(row[*feature_index], *threshold, *default_left) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Pre-order visit of every split node's feature name.
    pub fn for_each_split(&self, f: &mut impl FnMut(&str, usize)) {
        if let TreeNode::Split {
            feature,
            feature_index,
            left,
            right,
            ..
        } = self
        {
            f(feature, *feature_index);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub(crate) fn map_leaves(&mut self, f: &impl Fn(f64) -> f64) {
        match self {
            TreeNode::Leaf { weight } => *weight = f(*weight),
            TreeNode::Split { left, right, .. } => {
                left.map_leaves(f);
                right.map_leaves(f);
            }
        }
    }
}

#[inline]
pub(crate) fn goes_left(value: f64, threshold: f64, default_left: bool) -> bool {
    if value.is_nan() {
        default_left
    } else {
        value <= threshold
    }
}

/// Sign-preserving soft threshold of a gradient sum by the L1 penalty.
#[inline]
fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

#[inline]
fn score(g: f64, h: f64, p: &TrainParams) -> f64 {
    let t = soft_threshold(g, p.reg_alpha);
    let denom = h + p.reg_lambda;
    if denom > 0.0 {
        t * t / denom
    } else {
        0.0
    }
}

/// Regularized optimal weight `-T(G) / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, p: &TrainParams) -> f64 {
    let denom = h + p.reg_lambda;
    if denom > 0.0 {
        -soft_threshold(g, p.reg_alpha) / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub default_left: bool,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy)]
struct NodeStats {
    g: f64,
    h: f64,
    n: usize,
}

// Splits whose gain is numerically indistinguishable from zero are noise.
const GAIN_TOLERANCE: f64 = 1e-12;

/// Scans one feature's non-missing node rows, sorted ascending by value.
fn scan_feature(
    x: &Matrix,
    feature: usize,
    sorted_rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    node: NodeStats,
    params: &TrainParams,
    best: &mut Option<SplitCandidate>,
) {
    let min_child = params.min_child_samples;
    let parent = score(node.g, node.h, params);
    let floor = GAIN_TOLERANCE * (1.0 + parent.abs());

    let (mut g_present, mut h_present) = (0.0, 0.0);
    for &r in sorted_rows {
        g_present += grad[r as usize];
        h_present += hess[r as usize];
    }
    let n_missing = node.n - sorted_rows.len();
    let g_missing = node.g - g_present;
    let h_missing = node.h - h_present;

    let (mut gl, mut hl) = (0.0, 0.0);
    for i in 0..sorted_rows.len().saturating_sub(1) {
        let r = sorted_rows[i] as usize;
        gl += grad[r];
        hl += hess[r];
        let lo = x.get(r, feature);
        let hi = x.get(sorted_rows[i + 1] as usize, feature);
        if lo >= hi {
            continue;
        }
        let mut threshold = lo + 0.5 * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        let nl = i + 1;

        // Missing rows right, then missing rows left.
        let options: [(f64, f64, usize, bool); 2] = if n_missing == 0 {
            let larger_left = nl >= node.n - nl;
            [(gl, hl, nl, larger_left), (f64::NAN, 0.0, 0, false)]
        } else {
            [
                (gl, hl, nl, false),
                (gl + g_missing, hl + h_missing, nl + n_missing, true),
            ]
        };
        for (g_left, h_left, n_left, default_left) in options {
            if g_left.is_nan() {
                continue;
            }
            let n_right = node.n - n_left;
            if n_left < min_child || n_right < min_child {
                continue;
            }
            let gain = 0.5
                * (score(g_left, h_left, params) + score(node.g - g_left, node.h - h_left, params)
                    - parent)
                - params.gamma;
            if gain > floor && best.is_none_or(|b| gain > b.gain) {
                *best = Some(SplitCandidate {
                    feature,
                    threshold,
                    default_left,
                    gain,
                });
            }
        }
    }
}

fn sorted_non_missing(x: &Matrix, rows: &[usize], feature: usize) -> Vec<u32> {
    let mut v: Vec<u32> = rows
        .iter()
        .filter(|&&r| !x.get(r, feature).is_nan())
        .map(|&r| r as u32)
        .collect();
    v.sort_by(|&a, &b| {
        x.get(a as usize, feature)
            .total_cmp(&x.get(b as usize, feature))
            .then(a.cmp(&b))
    });
    v
}

/// Best regularized split of `rows` over `features`, or `None` when no
/// candidate has positive gain with both children holding at least
/// `min_child_samples` rows. Ties keep the lowest feature index, then the
/// lowest threshold.
pub fn best_split(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let node = NodeStats {
        g: rows.iter().map(|&r| grad[r]).sum(),
        h: rows.iter().map(|&r| hess[r]).sum(),
        n: rows.len(),
    };
    let mut features = features.to_vec();
    features.sort_unstable();
    let mut best = None;
    for &f in &features {
        let sorted = sorted_non_missing(x, rows, f);
        scan_feature(x, f, &sorted, grad, hess, node, params, &mut best);
    }
    best
}

/// Row order of every column over all matrix rows, missing values dropped.
pub(crate) struct PresortedColumns {
    columns: Vec<Vec<u32>>,
}

impl PresortedColumns {
    pub(crate) fn new(x: &Matrix) -> Self {
        let all: Vec<usize> = (0..x.n_rows()).collect();
        Self {
            columns: (0..x.n_cols())
                .map(|f| sorted_non_missing(x, &all, f))
                .collect(),
        }
    }
}

struct BuildNode {
    rows: Vec<usize>,
    /// Per candidate feature (parallel to `TreeBuilder::features`).
    sorted: Vec<Vec<u32>>,
    stats: NodeStats,
    depth: usize,
    split: Option<SplitCandidate>,
    arena_index: usize,
}

enum ArenaNode {
    Leaf(f64),
    Split {
        split: SplitCandidate,
        left: usize,
        right: usize,
    },
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a TrainParams,
    features: Vec<usize>,
    arena: Vec<ArenaNode>,
    in_left: Vec<bool>,
}

impl<'a> TreeBuilder<'a> {
    fn make_node(&mut self, rows: Vec<usize>, sorted: Vec<Vec<u32>>, depth: usize) -> BuildNode {
        let stats = NodeStats {
            g: rows.iter().map(|&r| self.grad[r]).sum(),
            h: rows.iter().map(|&r| self.hess[r]).sum(),
            n: rows.len(),
        };
        let arena_index = self.arena.len();
        self.arena
            .push(ArenaNode::Leaf(leaf_weight(stats.g, stats.h, self.params)));
        let mut node = BuildNode {
            rows,
            sorted,
            stats,
            depth,
            split: None,
            arena_index,
        };
        if depth < self.params.max_depth && node.stats.n >= 2 * self.params.min_child_samples {
            let mut best = None;
            for (k, &f) in self.features.iter().enumerate() {
                scan_feature(
                    self.x,
                    f,
                    &node.sorted[k],
                    self.grad,
                    self.hess,
                    node.stats,
                    self.params,
                    &mut best,
                );
            }
            node.split = best;
        }
        node
    }

    fn split(&mut self, node: BuildNode) -> (BuildNode, BuildNode) {
        let split = node.split.expect("split() called on unsplittable node");
        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &node.rows {
            let left = goes_left(self.x.get(r, split.feature), split.threshold, split.default_left);
            self.in_left[r] = left;
            if left {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        let mut left_sorted = Vec::with_capacity(node.sorted.len());
        let mut right_sorted = Vec::with_capacity(node.sorted.len());
        for col in &node.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) =
                col.iter().partition(|&&row| self.in_left[row as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.make_node(left_rows, left_sorted, node.depth + 1);
        let right = self.make_node(right_rows, right_sorted, node.depth + 1);
        self.arena[node.arena_index] = ArenaNode::Split {
            split,
            left: left.arena_index,
            right: right.arena_index,
        };
        (left, right)
    }

    fn grow(&mut self, root: BuildNode) {
        let max_leaves = self.params.num_leaves;
        let mut n_leaves = 1;
        match self.params.growth {
            Growth::DepthWise => {
                let mut level = vec![root];
                while !level.is_empty() {
                    // Within a level, higher-gain nodes claim the leaf budget first.
                    let mut order: Vec<usize> = (0..level.len())
                        .filter(|&i| level[i].split.is_some())
                        .collect();
                    order.sort_by(|&a, &b| {
                        let ga = level[a].split.map_or(0.0, |s| s.gain);
                        let gb = level[b].split.map_or(0.0, |s| s.gain);
                        gb.total_cmp(&ga).then(a.cmp(&b))
                    });
                    let budget = max_leaves.saturating_sub(n_leaves);
                    order.truncate(budget);
                    order.sort_unstable();
                    n_leaves += order.len();

                    let mut next = Vec::with_capacity(2 * order.len());
                    let mut chosen = order.into_iter().peekable();
                    for (i, node) in level.into_iter().enumerate() {
                        if chosen.peek() == Some(&i) {
                            chosen.next();
                            let (l, r) = self.split(node);
                            next.push(l);
                            next.push(r);
                        }
                    }
                    level = next;
                }
            }
            Growth::LeafWise => {
                let mut frontier = vec![root];
                while n_leaves < max_leaves {
                    let pick = frontier
                        .iter()
                        .enumerate()
                        .filter_map(|(i, n)| n.split.map(|s| (i, s.gain, n.arena_index)))
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
                    let Some((i, _, _)) = pick else { break };
                    let node = frontier.swap_remove(i);
                    let (l, r) = self.split(node);
                    frontier.push(l);
                    frontier.push(r);
                    n_leaves += 1;
                }
            }
        }
    }

    fn into_tree(self, schema: &[String]) -> TreeNode {
        fn build(arena: &[ArenaNode], i: usize, schema: &[String]) -> TreeNode {
            match &arena[i] {
                ArenaNode::Leaf(w) => TreeNode::leaf(*w),
                ArenaNode::Split { split, left, right } => TreeNode::Split {
                    feature: schema[split.feature].clone(),
                    feature_index: split.feature,
                    threshold: split.threshold,
                    default_left: split.default_left,
                    left: Box::new(build(arena, *left, schema)),
                    right: Box::new(build(arena, *right, schema)),
                },
            }
        }
        build(&self.arena, 0, schema)
    }
}

/// Number of columns a tree sees under `colsample_bytree`.
fn n_sampled_columns(n_cols: usize, fraction: f64) -> usize {
    ((fraction * n_cols as f64).round() as usize).clamp(1, n_cols.max(1))
}

pub(crate) fn fit_tree_presorted<R: Rng>(
    x: &Matrix,
    presorted: &PresortedColumns,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &TrainParams,
    schema: &[String],
    rng: &mut R,
) -> TreeNode {
    let n_cols = x.n_cols();
    let features: Vec<usize> = if params.colsample_bytree < 1.0 && n_cols > 1 {
        let k = n_sampled_columns(n_cols, params.colsample_bytree);
        let mut f = sample(rng, n_cols, k).into_vec();
        f.sort_unstable();
        f
    } else {
        (0..n_cols).collect()
    };

    let mut member = vec![false; x.n_rows()];
    for &r in rows {
        member[r] = true;
    }
    let sorted: Vec<Vec<u32>> = features
        .iter()
        .map(|&f| {
            presorted.columns[f]
                .iter()
                .copied()
                .filter(|&r| member[r as usize])
                .collect()
        })
        .collect();

    let mut builder = TreeBuilder {
        x,
        grad,
        hess,
        params,
        features,
        arena: Vec::new(),
        in_left: vec![false; x.n_rows()],
    };
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    let root = builder.make_node(rows, sorted, 0);
    builder.grow(root);
    builder.into_tree(schema)
}

/// Grows one regression tree on the given rows' gradients and hessians.
///
/// `schema` names the matrix columns; `rng` drives column subsampling.
pub fn fit_tree<R: Rng>(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &TrainParams,
    schema: &[String],
    rng: &mut R,
) -> TreeNode {
    let presorted = PresortedColumns::new(x);
    fit_tree_presorted(x, &presorted, rows, grad, hess, params, schema, rng)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn params() -> TrainParams {
        TrainParams {
            reg_lambda: 0.0,
            gamma: 0.0,
            reg_alpha: 0.0,
            min_child_samples: 1,
            ..Default::default()
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn two_point_split_hand_gain() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        // base 5, targets 0 and 10: g = pred - y
        let grad = [5.0, -5.0];
        let hess = [1.0, 1.0];
        let s = best_split(&x, &[0, 1], &grad, &hess, &[0], &params()).unwrap();
        assert_eq!(s.threshold, 0.5);
        assert_eq!(s.gain, 25.0);
        assert_eq!(leaf_weight(5.0, 1.0, &params()), -5.0);
        assert_eq!(leaf_weight(-5.0, 1.0, &params()), 5.0);
    }

    #[test]
    fn equal_targets_have_no_split() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let grad = [0.0; 4];
        assert!(best_split(&x, &[0, 1, 2, 3], &grad, &[1.0; 4], &[0], &params()).is_none());
        let grad = [0.3; 4];
        assert!(best_split(&x, &[0, 1, 2, 3], &grad, &[1.0; 4], &[0], &params()).is_none());
    }

    #[test]
    fn min_child_samples_blocks_split() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let p = TrainParams {
            min_child_samples: 2,
            ..params()
        };
        let grad = [1.0, -1.0, 5.0];
        assert!(best_split(&x, &[0, 1, 2], &grad, &[1.0; 3], &[0], &p).is_none());
    }

    #[test]
    fn missing_rows_pick_best_side() {
        // Missing rows share the gradient of the high-value rows.
        let x = Matrix::from_rows(&[
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![f64::NAN],
            vec![f64::NAN],
        ])
        .unwrap();
        let grad = [4.0, 4.0, -4.0, -4.0, -4.0, -4.0];
        let s = best_split(&x, &[0, 1, 2, 3, 4, 5], &grad, &[1.0; 6], &[0], &params()).unwrap();
        assert_eq!(s.threshold, 1.5);
        assert!(!s.default_left);
        let grad = [4.0, 4.0, -4.0, -4.0, 4.0, 4.0];
        let s = best_split(&x, &[0, 1, 2, 3, 4, 5], &grad, &[1.0; 6], &[0], &params()).unwrap();
        assert!(s.default_left);
    }

    #[test]
    fn ties_keep_lowest_feature() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = best_split(&x, &[0, 1], &[1.0, -1.0], &[1.0; 2], &[1, 0], &params()).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn single_row_is_leaf() {
        let x = Matrix::from_rows(&[vec![3.0]]).unwrap();
        let p = TrainParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = fit_tree(&x, &[0], &[2.0], &[1.0], &p, &names(1), &mut rng);
        assert_eq!(t, TreeNode::leaf(-2.0 / (1.0 + p.reg_lambda)));
    }

    #[test]
    fn stump_recovers_step() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        // targets 1 below 10, 3 from 10 on; base prediction 0
        let grad: Vec<f64> = (0..20).map(|i| if i < 10 { -1.0 } else { -3.0 }).collect();
        let p = TrainParams {
            max_depth: 1,
            ..params()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all: Vec<usize> = (0..20).collect();
        let t = fit_tree(&x, &all, &grad, &[1.0; 20], &p, &names(1), &mut rng);
        match &t {
            TreeNode::Split {
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(*threshold, 9.5);
                assert_eq!(**left, TreeNode::leaf(1.0));
                assert_eq!(**right, TreeNode::leaf(3.0));
            }
            other => panic!("expected a stump, got {other:?}"),
        }
    }

    #[test]
    fn leaf_budget_is_respected() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * 7 % 64) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let grad: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let all: Vec<usize> = (0..64).collect();
        for growth in [Growth::DepthWise, Growth::LeafWise] {
            let p = TrainParams {
                max_depth: 5,
                num_leaves: 7,
                growth,
                ..params()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let t = fit_tree(&x, &all, &grad, &[1.0; 64], &p, &names(2), &mut rng);
            assert!(t.n_leaves() <= 7, "{growth:?}: {} leaves", t.n_leaves());
            assert!(t.depth() <= 5);
        }
    }
}
