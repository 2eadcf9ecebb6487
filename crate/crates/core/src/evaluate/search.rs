use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, mape, Metric};
use super::split::kfold;
use crate::dxf::MaterialLexicon;
use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt, TrainParams};
use crate::pipeline::{GroupPipeline, Sample};

/// Share of each CV training fold held back for early stopping.
const INNER_VALID_FRACTION: f64 = 0.15;
const MIN_ROWS_FOR_INNER_VALID: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub mae: f64,
    pub mape: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldScore>,
    pub mean_mae: f64,
    pub mean_mape: f64,
}

/// k-fold cross-validation of the full per-group pipeline.
///
/// The group reference is refit on each training fold. When early stopping
/// is enabled, a seeded 15% of the training fold becomes the stopping set.
pub fn cross_validate(
    samples: &[Sample],
    lexicon: &MaterialLexicon,
    params: &TrainParams,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let all: Vec<usize> = (0..samples.len()).collect();
    let folds = kfold(&all, k, seed)?;
    let mut scores = Vec::with_capacity(k);
    for (f, held_out) in folds.iter().enumerate() {
        let mut train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train_idx.sort_unstable();

        let train: Vec<&Sample> = train_idx.iter().map(|&i| &samples[i]).collect();
        let test: Vec<&Sample> = held_out.iter().map(|&i| &samples[i]).collect();
        let pipeline = GroupPipeline::fit(
            &train.iter().map(|s| &s.quantities).collect::<Vec<_>>(),
            lexicon,
        )?;

        let (fit_rows, stop_rows) = if params.early_stopping_rounds > 0
            && train.len() >= MIN_ROWS_FOR_INNER_VALID
        {
            let n_stop = ((INNER_VALID_FRACTION * train.len() as f64).round() as usize).max(1);
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(f as u64 + 1)));
            let mut stop = order.split_off(train.len() - n_stop);
            order.sort_unstable();
            stop.sort_unstable();
            (order, Some(stop))
        } else {
            ((0..train.len()).collect(), None)
        };
        let fit_set = pipeline.dataset(&fit_rows.iter().map(|&i| train[i]).collect::<Vec<_>>())?;
        let stop_set = stop_rows
            .map(|rows| pipeline.dataset(&rows.iter().map(|&i| train[i]).collect::<Vec<_>>()))
            .transpose()?;
        let model = fit_gbdt(&fit_set, stop_set.as_ref(), params, Metric::Mape)?;

        let test_set = pipeline.dataset(&test)?;
        let pred = model.predict_matrix(&test_set.features)?;
        scores.push(FoldScore {
            mae: mae(&test_set.targets, &pred)?,
            mape: mape(&test_set.targets, &pred)?,
            n: test.len(),
        });
    }
    let kf = scores.len() as f64;
    Ok(CvResult {
        mean_mae: scores.iter().map(|s| s.mae).sum::<f64>() / kf,
        mean_mape: scores.iter().map(|s| s.mape).sum::<f64>() / kf,
        folds: scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub depth: usize,
    pub lr: f64,
    pub mean_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Row-major over (depth, learning rate) in input order.
    pub cells: Vec<GridCell>,
    pub best: GridCell,
}

impl GridResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["depth", "lr", "mean_mae"])?;
        for c in &self.cells {
            w.write_record([c.depth.to_string(), c.lr.to_string(), c.mean_mae.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<grid csv>", e))?;
        Ok(())
    }
}

/// Lowest mean MAE; ties go to the smaller depth, then the smaller rate.
pub fn best_cell(cells: &[GridCell]) -> Option<GridCell> {
    cells.iter().copied().min_by(|a, b| {
        a.mean_mae
            .total_cmp(&b.mean_mae)
            .then(a.depth.cmp(&b.depth))
            .then(a.lr.total_cmp(&b.lr))
    })
}

/// Cross-validated MAE for every `max_depth` × `learning_rate` pair.
pub fn grid_search(
    samples: &[Sample],
    lexicon: &MaterialLexicon,
    depths: &[usize],
    learning_rates: &[f64],
    base: &TrainParams,
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    if depths.is_empty() || learning_rates.is_empty() {
        return Err(Error::invalid("grid axes must be non-empty"));
    }
    let mut cells = Vec::with_capacity(depths.len() * learning_rates.len());
    for &depth in depths {
        for &lr in learning_rates {
            let params = TrainParams {
                max_depth: depth,
                learning_rate: lr,
                ..base.clone()
            };
            let cv = cross_validate(samples, lexicon, &params, k, seed)?;
            cells.push(GridCell {
                depth,
                lr,
                mean_mae: cv.mean_mae,
            });
        }
    }
    let best = best_cell(&cells).expect("non-empty grid");
    Ok(GridResult { cells, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamRange {
    Linear { lo: f64, hi: f64 },
    Log { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64 },
    Choice { values: Vec<f64> },
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Linear { lo, hi } => lo <= hi,
            ParamRange::Log { lo, hi } => *lo > 0.0 && lo <= hi,
            ParamRange::Int { lo, hi } => lo <= hi,
            ParamRange::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid search range for {name}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ParamRange::Linear { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ParamRange::Log { lo, hi } => {
                (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>())
                    .exp()
                    .clamp(*lo, *hi)
            }
            ParamRange::Int { lo, hi } => rng.random_range(*lo..=*hi) as f64,
            ParamRange::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            ParamRange::Linear { lo, hi } | ParamRange::Log { lo, hi } => *lo <= v && v <= *hi,
            ParamRange::Int { lo, hi } => v.fract() == 0.0 && *lo as f64 <= v && v <= *hi as f64,
            ParamRange::Choice { values } => values.contains(&v),
        }
    }
}

/// Tunable parameters by [`TrainParams`] field name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub ranges: BTreeMap<String, ParamRange>,
}

impl SearchSpace {
    /// Default tuning ranges for every [`TrainParams`] knob except the tree count.
    pub fn standard() -> Self {
        let mut r = BTreeMap::new();
        r.insert("learning_rate".into(), ParamRange::Log { lo: 0.01, hi: 0.30 });
        r.insert("max_depth".into(), ParamRange::Int { lo: 3, hi: 10 });
        r.insert("subsample".into(), ParamRange::Linear { lo: 0.5, hi: 1.0 });
        r.insert(
            "colsample_bytree".into(),
            ParamRange::Linear { lo: 0.3, hi: 1.0 },
        );
        r.insert("gamma".into(), ParamRange::Linear { lo: 0.0, hi: 1.0 });
        r.insert("reg_alpha".into(), ParamRange::Linear { lo: 0.0, hi: 5.0 });
        r.insert("reg_lambda".into(), ParamRange::Linear { lo: 0.0, hi: 5.0 });
        r.insert("num_leaves".into(), ParamRange::Int { lo: 15, hi: 64 });
        r.insert("min_child_samples".into(), ParamRange::Int { lo: 5, hi: 30 });
        Self { ranges: r }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, range) in &self.ranges {
            range.validate(name)?;
            set_param(&mut TrainParams::default(), name, 1.0)?;
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, base: &TrainParams, rng: &mut R) -> Result<TrainParams> {
        let mut p = base.clone();
        for (name, range) in &self.ranges {
            set_param(&mut p, name, range.sample(rng))?;
        }
        Ok(p)
    }

    pub fn contains(&self, params: &TrainParams) -> bool {
        self.ranges
            .iter()
            .all(|(name, range)| get_param(params, name).is_some_and(|v| range.contains(v)))
    }
}

fn set_param(p: &mut TrainParams, name: &str, v: f64) -> Result<()> {
    let as_count = |v: f64| v.round().max(0.0) as usize;
    match name {
        "learning_rate" => p.learning_rate = v,
        "max_depth" => p.max_depth = as_count(v),
        "n_estimators" => p.n_estimators = as_count(v),
        "subsample" => p.subsample = v,
        "colsample_bytree" => p.colsample_bytree = v,
        "gamma" => p.gamma = v,
        "reg_alpha" => p.reg_alpha = v,
        "reg_lambda" => p.reg_lambda = v,
        "num_leaves" => p.num_leaves = as_count(v),
        "min_child_samples" => p.min_child_samples = as_count(v),
        other => return Err(Error::invalid(format!("{other:?} is not a tunable parameter"))),
    }
    Ok(())
}

fn get_param(p: &TrainParams, name: &str) -> Option<f64> {
    Some(match name {
        "learning_rate" => p.learning_rate,
        "max_depth" => p.max_depth as f64,
        "n_estimators" => p.n_estimators as f64,
        "subsample" => p.subsample,
        "colsample_bytree" => p.colsample_bytree,
        "gamma" => p.gamma,
        "reg_alpha" => p.reg_alpha,
        "reg_lambda" => p.reg_lambda,
        "num_leaves" => p.num_leaves as f64,
        "min_child_samples" => p.min_child_samples as f64,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: TrainParams,
    pub cv_mape: f64,
    pub cv_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub trials: Vec<Trial>,
    pub best: Trial,
}

impl SearchResult {
    pub fn write_csv<W: Write>(&self, out: W, space: &SearchSpace) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["trial".to_string()];
        header.extend(space.ranges.keys().cloned());
        header.extend(["cv_mape".into(), "cv_mae".into()]);
        w.write_record(&header)?;
        for t in &self.trials {
            let mut row = vec![t.index.to_string()];
            for name in space.ranges.keys() {
                row.push(get_param(&t.params, name).map_or(String::new(), |v| v.to_string()));
            }
            row.push(t.cv_mape.to_string());
            row.push(t.cv_mae.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<trial csv>", e))?;
        Ok(())
    }
}

/// Seeded random search minimizing mean k-fold CV MAPE. With
/// `include_base`, trial 0 evaluates `base` unchanged.
pub fn random_search(
    samples: &[Sample],
    lexicon: &MaterialLexicon,
    space: &SearchSpace,
    base: &TrainParams,
    n_trials: usize,
    k: usize,
    seed: u64,
    include_base: bool,
) -> Result<SearchResult> {
    if n_trials == 0 {
        return Err(Error::invalid("random search needs at least one trial"));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let params = if include_base && index == 0 {
            base.clone()
        } else {
            space.sample(base, &mut rng)?
        };
        let cv = cross_validate(samples, lexicon, &params, k, seed)?;
        trials.push(Trial {
            index,
            params,
            cv_mape: cv.mean_mape,
            cv_mae: cv.mean_mae,
        });
    }
    let best = trials
        .iter()
        .min_by(|a, b| a.cv_mape.total_cmp(&b.cv_mape).then(a.index.cmp(&b.index)))
        .cloned()
        .expect("at least one trial");
    Ok(SearchResult { trials, best })
}
