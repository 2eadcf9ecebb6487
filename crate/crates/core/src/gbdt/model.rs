use std::collections::BTreeMap;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{Dataset, Matrix};
use super::params::TrainParams;
use super::tree::{fit_tree_presorted, PresortedColumns, TreeNode};
use crate::error::{Error, Result};
use crate::evaluate::Metric;

pub const MODEL_FORMAT: &str = "cadcost-gbdt/1";

/// Validation improvements at or below this do not reset patience.
const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub train: f64,
    pub valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub params: TrainParams,
    pub metric: Metric,
    pub schema: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    /// Number of leading trees used for prediction.
    pub best_iteration: usize,
    pub trees: Vec<TreeNode>,
    pub log: Vec<RoundLog>,
}

/// Patience counter over a validation metric (lower is better).
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_round: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_round: 0,
            stale: 0,
        }
    }

    /// Records the metric of 1-based `round`; returns true once `patience`
    /// consecutive rounds have passed without improvement.
    pub fn update(&mut self, round: usize, metric: f64) -> bool {
        if metric < self.best - MIN_IMPROVEMENT {
            self.best = metric;
            self.best_round = round;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.patience > 0 && self.stale >= self.patience
    }

    pub fn best_round(&self) -> usize {
        self.best_round
    }
}

fn check_targets(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite target {bad}")));
    }
    Ok(())
}

/// Mean anchored at the first value, exact for constant samples.
fn mean(y: &[f64]) -> f64 {
    let anchor = y[0];
    anchor + y.iter().map(|v| v - anchor).sum::<f64>() / y.len() as f64
}

/// Gradient boosting with squared loss.
///
/// Each round fits a tree to `prediction - target` (unit hessians) on a
/// subsample of rows and adds it with shrinkage `learning_rate`. With a
/// validation set and non-zero `early_stopping_rounds`, training stops once
/// the validation metric has not improved for that many rounds and
/// `best_iteration` points at the best round.
pub fn fit_gbdt(
    train: &Dataset,
    valid: Option<&Dataset>,
    params: &TrainParams,
    metric: Metric,
) -> Result<GbdtModel> {
    params.validate()?;
    check_targets(&train.targets)?;
    if let Some(v) = valid {
        check_targets(&v.targets)?;
        if v.schema != train.schema {
            return Err(Error::schema("validation schema differs from training schema"));
        }
    }

    let x = &train.features;
    let y = &train.targets;
    let n = y.len();
    let base_score = mean(y);
    let mut pred = vec![base_score; n];
    let mut valid_pred = valid.map(|v| vec![base_score; v.len()]);

    let presorted = PresortedColumns::new(x);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let all_rows: Vec<usize> = (0..n).collect();
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut trees = Vec::new();
    let mut log = Vec::new();
    let mut stopper = EarlyStopping::new(params.early_stopping_rounds);
    let use_stopping = valid.is_some() && params.early_stopping_rounds > 0;

    for round in 1..=params.n_estimators {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let rows = if n_sub < n {
            let mut r = sample(&mut rng, n, n_sub).into_vec();
            r.sort_unstable();
            r
        } else {
            all_rows.clone()
        };
        let tree = fit_tree_presorted(
            x,
            &presorted,
            &rows,
            &grad,
            &hess,
            params,
            &train.schema,
            &mut rng,
        );
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict(x.row(i));
        }
        let train_metric = metric.evaluate(y, &pred)?;
        let valid_metric = match (valid, valid_pred.as_mut()) {
            (Some(v), Some(vp)) => {
                for (i, p) in vp.iter_mut().enumerate() {
                    *p += params.learning_rate * tree.predict(v.features.row(i));
                }
                Some(metric.evaluate(&v.targets, vp)?)
            }
            _ => None,
        };
        trees.push(tree);
        log.push(RoundLog {
            round,
            train: train_metric,
            valid: valid_metric,
        });
        if use_stopping && stopper.update(round, valid_metric.expect("validation metric")) {
            break;
        }
    }

    let best_iteration = if use_stopping {
        stopper.best_round()
    } else {
        trees.len()
    };
    Ok(GbdtModel {
        format: MODEL_FORMAT.into(),
        params: params.clone(),
        metric,
        schema: train.schema.clone(),
        base_score,
        learning_rate: params.learning_rate,
        best_iteration,
        trees,
        log,
    })
}

impl GbdtModel {
    /// Prediction from a schema-ordered row (`NaN` = missing).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_with(row, self.best_iteration)
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_row_with(&self, row: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .take(n_trees)
            .map(|t| t.predict(row))
            .sum();
        self.base_score + self.learning_rate * sum
    }

    /// Prediction from named features. Names outside the schema are
    /// ignored; schema features that are absent or `None` count as missing.
    pub fn predict(&self, features: &IndexMap<String, Option<f64>>) -> f64 {
        self.predict_row(&self.dense_row(features))
    }

    pub fn dense_row(&self, features: &IndexMap<String, Option<f64>>) -> Vec<f64> {
        self.schema
            .iter()
            .map(|name| features.get(name).copied().flatten().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.schema.len() {
            return Err(Error::schema(format!(
                "matrix has {} columns, model schema has {}",
                x.n_cols(),
                self.schema.len()
            )));
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    pub fn used_trees(&self) -> &[TreeNode] {
        &self.trees[..self.best_iteration.min(self.trees.len())]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::schema(format!("unknown model format {:?}", model.format)));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Share of split nodes per feature across the trees used for prediction.
/// Sums to 1; empty for a model without splits.
pub fn split_count_importance(model: &GbdtModel) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for tree in model.used_trees() {
        tree.for_each_split(&mut |name, _| *counts.entry(name.to_string()).or_default() += 1);
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect()
}

/// Single regression tree fit directly on the targets; every leaf predicts
/// the mean target of its rows. `max_depth` 0 gives one leaf.
pub fn fit_cart(train: &Dataset, params: &TrainParams) -> Result<TreeNode> {
    check_targets(&train.targets)?;
    let y = &train.targets;
    let n = y.len();
    let mean = mean(y);
    if params.max_depth == 0 {
        return Ok(TreeNode::leaf(mean));
    }
    let p = TrainParams {
        reg_lambda: 0.0,
        reg_alpha: 0.0,
        subsample: 1.0,
        colsample_bytree: 1.0,
        learning_rate: 1.0,
        ..params.clone()
    };
    p.validate()?;
    let grad: Vec<f64> = y.iter().map(|t| mean - t).collect();
    let hess = vec![1.0; n];
    let rows: Vec<usize> = (0..n).collect();
    let presorted = PresortedColumns::new(&train.features);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut tree = fit_tree_presorted(
        &train.features,
        &presorted,
        &rows,
        &grad,
        &hess,
        &p,
        &train.schema,
        &mut rng,
    );
    tree.map_leaves(&|w| mean + w);
    Ok(tree)
}
