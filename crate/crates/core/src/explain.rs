//! Model explanations: split-count and permutation importances, exact
//! Shapley values over a small active feature set, and tree export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::Metric;
use crate::gbdt::{split_count_importance, GbdtModel, Matrix, TreeNode};

/// Largest active set accepted by [`exact_shapley`] (2^d coalitions).
pub const MAX_SHAPLEY_FEATURES: usize = 12;
pub const DEFAULT_BACKGROUND_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    SplitCount,
    Permutation,
    ShapleyMeanAbs,
}

impl ImportanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImportanceMethod::SplitCount => "split_count",
            ImportanceMethod::Permutation => "permutation",
            ImportanceMethod::ShapleyMeanAbs => "shapley_mean_abs",
        }
    }
}

/// Feature weights sorted by descending weight, ties by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub entries: Vec<(String, f64)>,
}

impl ImportanceReport {
    pub fn new(method: ImportanceMethod, weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut entries: Vec<(String, f64)> = weights.into_iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self { method, entries }
    }

    pub fn split_count(model: &GbdtModel) -> Self {
        Self::new(ImportanceMethod::SplitCount, split_count_importance(model))
    }

    pub fn weight(&self, feature: &str) -> f64 {
        self.entries
            .iter()
            .find(|(f, _)| f == feature)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn top(&self, k: usize) -> &[(String, f64)] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// CSV with columns `rank,feature,weight,method`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "feature", "weight", "method"])?;
        for (i, (f, v)) in self.entries.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                f.clone(),
                v.to_string(),
                self.method.name().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<importance csv>", e))?;
        Ok(())
    }
}

/// Per-feature mean weight across reports, a feature absent from a report
/// counting as 0.
pub fn average_importance(reports: &[ImportanceReport]) -> Result<ImportanceReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("no importance reports to average"))?;
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for r in reports {
        for (f, w) in &r.entries {
            *sums.entry(f.clone()).or_default() += w;
        }
    }
    let n = reports.len() as f64;
    Ok(ImportanceReport::new(
        first.method,
        sums.into_iter().map(|(f, s)| (f, s / n)),
    ))
}

/// Schema indices of the features split on by the trees used for
/// prediction.
pub fn used_features(model: &GbdtModel) -> Vec<usize> {
    let mut used = BTreeSet::new();
    for t in model.used_trees() {
        t.for_each_split(&mut |_, i| {
            used.insert(i);
        });
    }
    used.into_iter().collect()
}

/// Mean increase of `metric` when one column is shuffled, per feature.
///
/// Features no tree splits on are exactly 0: their column never reaches a
/// prediction.
pub fn permutation_importance(
    model: &GbdtModel,
    data: &Matrix,
    targets: &[f64],
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if data.n_rows() == 0 {
        return Err(Error::invalid("permutation importance needs data"));
    }
    if n_repeats == 0 {
        return Err(Error::invalid("permutation importance needs at least one repeat"));
    }
    let baseline = metric.evaluate(targets, &model.predict_matrix(data)?)?;
    let used: BTreeSet<usize> = used_features(model).into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = data.clone();
    let mut weights = Vec::with_capacity(model.schema.len());
    for (j, name) in model.schema.iter().enumerate() {
        if !used.contains(&j) {
            weights.push((name.clone(), 0.0));
            continue;
        }
        let original: Vec<f64> = (0..data.n_rows()).map(|r| data.get(r, j)).collect();
        let mut total = 0.0;
        for _ in 0..n_repeats {
            let mut shuffled = original.clone();
            shuffled.shuffle(&mut rng);
            for (r, v) in shuffled.iter().enumerate() {
                work.set(r, j, *v);
            }
            total += metric.evaluate(targets, &model.predict_matrix(&work)?)? - baseline;
        }
        for (r, v) in original.iter().enumerate() {
            work.set(r, j, *v);
        }
        weights.push((name.clone(), total / n_repeats as f64));
    }
    Ok(ImportanceReport::new(ImportanceMethod::Permutation, weights))
}

/// Up to `max_rows` rows drawn without replacement, in original order.
pub fn background_sample(x: &Matrix, max_rows: usize, seed: u64) -> Matrix {
    if x.n_rows() <= max_rows {
        return x.clone();
    }
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(max_rows);
    idx.sort_unstable();
    x.select_rows(&idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// `(schema index, name, value)` for each active feature.
    pub values: Vec<(usize, String, f64)>,
    /// Model output on the explained row.
    pub prediction: f64,
    /// Mean model output over the background.
    pub baseline: f64,
}

impl ShapleyValues {
    pub fn total(&self) -> f64 {
        self.values.iter().map(|v| v.2).sum()
    }
}

/// Exact interventional Shapley values of `row` over an active feature set.
///
/// A coalition's value is the mean prediction over background rows in
/// which the coalition's features are replaced by the row's values.
/// Features outside the active set always take background values, so the
/// values sum to `prediction - baseline` whenever the active set covers
/// every feature the model uses (the default, `features = None`).
///
/// The model is additive over trees, so each tree is solved as its own
/// game over the active features it splits on.
pub fn exact_shapley(
    model: &GbdtModel,
    row: &[f64],
    background: &Matrix,
    features: Option<&[usize]>,
) -> Result<ShapleyValues> {
    if background.n_rows() == 0 {
        return Err(Error::invalid("Shapley values need a non-empty background"));
    }
    if row.len() != model.schema.len() || background.n_cols() != model.schema.len() {
        return Err(Error::schema("row/background width differs from the model schema"));
    }
    let active: Vec<usize> = match features {
        Some(f) => f.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        None => used_features(model),
    };
    if active.len() > MAX_SHAPLEY_FEATURES {
        return Err(Error::invalid(format!(
            "exact Shapley values enumerate 2^d coalitions; {} active features exceed the limit of {}. \
             Pick a smaller active set or use permutation importance",
            active.len(),
            MAX_SHAPLEY_FEATURES
        )));
    }
    if let Some(&bad) = active.iter().find(|&&f| f >= model.schema.len()) {
        return Err(Error::invalid(format!("feature index {bad} outside the schema")));
    }

    let mut phi: BTreeMap<usize, f64> = active.iter().map(|&f| (f, 0.0)).collect();
    let weights_by_size: Vec<Vec<f64>> = (0..=active.len()).map(coalition_weights).collect();
    let n_bg = background.n_rows() as f64;

    for tree in model.used_trees() {
        let mut tree_features = BTreeSet::new();
        tree.for_each_split(&mut |_, i| {
            tree_features.insert(i);
        });
        let players: Vec<usize> = active
            .iter()
            .copied()
            .filter(|f| tree_features.contains(f))
            .collect();
        if players.is_empty() {
            continue;
        }
        let d = players.len();
        let n_masks = 1usize << d;
        let mut value = vec![0.0; n_masks];
        for b in 0..background.n_rows() {
            let bg = background.row(b);
            for (mask, v) in value.iter_mut().enumerate() {
                *v += predict_with(tree, &|f| {
                    match players.iter().position(|&p| p == f) {
                        Some(k) if mask & (1 << k) != 0 => row[f],
                        _ => bg[f],
                    }
                });
            }
        }
        for v in &mut value {
            *v *= model.learning_rate / n_bg;
        }
        let w = &weights_by_size[d];
        for (k, &player) in players.iter().enumerate() {
            let bit = 1 << k;
            let mut acc = 0.0;
            for mask in 0..n_masks {
                if mask & bit == 0 {
                    acc += w[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
                }
            }
            *phi.get_mut(&player).expect("active player") += acc;
        }
    }

    let baseline = (0..background.n_rows())
        .map(|b| model.predict_row(background.row(b)))
        .sum::<f64>()
        / n_bg;
    Ok(ShapleyValues {
        values: phi
            .into_iter()
            .map(|(f, v)| (f, model.schema[f].clone(), v))
            .collect(),
        prediction: model.predict_row(row),
        baseline,
    })
}

/// `s! (d - s - 1)! / d!` for coalition sizes `s` in `0..d`.
fn coalition_weights(d: usize) -> Vec<f64> {
    if d == 0 {
        return Vec::new();
    }
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..d)
        .map(|s| fact(s) * fact(d - s - 1) / fact(d))
        .collect()
}

fn predict_with(tree: &TreeNode, value: &impl Fn(usize) -> f64) -> f64 {
    let mut node = tree;
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
                let v = value(*feature_index);
                let go_left = if v.is_nan() { *default_left } else { v <= *threshold };
                node = if go_left { left } else { right };
            }
        }
    }
}

/// Mean absolute Shapley value per active feature over `rows`.
pub fn shapley_mean_abs(
    model: &GbdtModel,
    rows: &Matrix,
    background: &Matrix,
    features: Option<&[usize]>,
) -> Result<ImportanceReport> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for r in 0..rows.n_rows() {
        for (_, name, v) in exact_shapley(model, rows.row(r), background, features)?.values {
            *sums.entry(name).or_default() += v.abs();
        }
    }
    let n = rows.n_rows().max(1) as f64;
    Ok(ImportanceReport::new(
        ImportanceMethod::ShapleyMeanAbs,
        sums.into_iter().map(|(f, s)| (f, s / n)),
    ))
}

/// Training statistics of one exported node, in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub samples: usize,
    pub proportion: f64,
    /// Mean target of the rows reaching the node.
    pub mean_target: Option<f64>,
    /// Leaf output, `None` for split nodes.
    pub leaf_value: Option<f64>,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeExport {
    pub dot: String,
    pub text: String,
    pub nodes: Vec<NodeStats>,
}

/// Renders a tree as Graphviz DOT and indented text rules.
///
/// Every node shows its share of the training rows (`x`, `y`) that reach
/// it and their mean target; split nodes add the `feature <= threshold`
/// rule, leaves their predicted value.
pub fn export_tree(tree: &TreeNode, x: &Matrix, y: &[f64]) -> Result<TreeExport> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("export_tree: rows and targets differ in length"));
    }
    let total = x.n_rows();
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..total).collect();
    collect(tree, &all, x, y, total, None, 0, &mut nodes);

    let mut dot = String::from("digraph Tree {\n  node [shape=box, style=\"rounded\", fontname=\"helvetica\"];\n");
    let mut text = String::new();
    for n in &nodes {
        let value = n.leaf_value.or(n.mean_target);
        let mut label = String::new();
        if let Some(rule) = &n.rule {
            let _ = write!(label, "{}\\n", escape(rule));
        }
        let _ = write!(label, "samples = {:.1}%\\nvalue = {}", 100.0 * n.proportion, fmt_value(value));
        let _ = writeln!(dot, "  {} [label=\"{}\"];", n.id, label);
        if let Some(p) = n.parent {
            let is_left = nodes.iter().filter(|m| m.parent == Some(p)).map(|m| m.id).min() == Some(n.id);
            let _ = writeln!(
                dot,
                "  {} -> {} [label=\"{}\"];",
                p,
                n.id,
                if is_left { "True" } else { "False" }
            );
        }

        let indent = "|   ".repeat(n.depth);
        match (&n.rule, n.leaf_value) {
            (Some(rule), _) => {
                let _ = writeln!(
                    text,
                    "{indent}|--- {rule}  [samples {:.1}%, mean {}]",
                    100.0 * n.proportion,
                    fmt_value(n.mean_target)
                );
            }
            (None, leaf) => {
                let _ = writeln!(
                    text,
                    "{indent}|--- value: {}  [samples {:.1}%]",
                    fmt_value(leaf),
                    100.0 * n.proportion
                );
            }
        }
    }
    dot.push_str("}\n");
    Ok(TreeExport { dot, text, nodes })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[allow(clippy::too_many_arguments)]
fn collect(
    node: &TreeNode,
    rows: &[usize],
    x: &Matrix,
    y: &[f64],
    total: usize,
    parent: Option<usize>,
    depth: usize,
    out: &mut Vec<NodeStats>,
) {
    let id = out.len();
    let mean_target = (!rows.is_empty())
        .then(|| rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64);
    let proportion = if total > 0 {
        rows.len() as f64 / total as f64
    } else {
        0.0
    };
    match node {
        TreeNode::Leaf { weight } => out.push(NodeStats {
            id,
            parent,
            depth,
            samples: rows.len(),
            proportion,
            mean_target,
            leaf_value: Some(*weight),
            rule: None,
        }),
        TreeNode::Split {
            feature,
            feature_index,
            threshold,
            default_left,
            left,
            right,
        } => {
            let missing = if *default_left { "missing → left" } else { "missing → right" };
            out.push(NodeStats {
                id,
                parent,
                depth,
                samples: rows.len(),
                proportion,
                mean_target,
                leaf_value: None,
                rule: Some(format!("{feature} <= {threshold:.4} ({missing})")),
            });
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| {
                let v = x.get(i, *feature_index);
                if v.is_nan() {
                    *default_left
                } else {
                    v <= *threshold
                }
            });
            collect(left, &l, x, y, total, Some(id), depth + 1, out);
            collect(right, &r, x, y, total, Some(id), depth + 1, out);
        }
    }
}
