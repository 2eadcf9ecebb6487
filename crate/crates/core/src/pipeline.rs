//! End-to-end glue: per-group feature pipelines, the multi-group model
//! bundle, training with evaluation reports, and the on-disk formats that
//! connect the stages (label CSV, feature CSV, quantity JSON lines).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dxf::{extract_quantities, read_drawing, Diagnostic, MaterialLexicon, QuantitySet};
use crate::error::{Error, Result};
use crate::evaluate::{mae, mape, split_dataset, Metric, SplitSpec};
use crate::features::{feature_schema, featurize, FeatureVector};
use crate::gbdt::{fit_gbdt, Dataset, GbdtModel, Matrix, TrainParams};
use crate::group_ref::{fit_group_reference, GroupReference};

/// One labelled drawing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub quantities: QuantitySet,
    pub cost: f64,
}

/// Featurization bound to one fitted group reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPipeline {
    pub reference: GroupReference,
    pub schema: Vec<String>,
}

impl GroupPipeline {
    pub fn fit(train: &[&QuantitySet], lexicon: &MaterialLexicon) -> Result<Self> {
        Ok(Self::from_reference(fit_group_reference(train, lexicon)?))
    }

    pub fn from_reference(reference: GroupReference) -> Self {
        let schema = feature_schema(&reference.vocabulary);
        Self { reference, schema }
    }

    pub fn featurize(&self, qs: &QuantitySet) -> Result<FeatureVector> {
        featurize(qs, Some(&self.reference))
    }

    /// Schema-ordered feature row, `NaN` for missing.
    pub fn row(&self, qs: &QuantitySet) -> Result<Vec<f64>> {
        let fv = self.featurize(qs)?;
        Ok(fv
            .values
            .values()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect())
    }

    pub fn matrix(&self, qs: &[&QuantitySet]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(qs.len() * self.schema.len());
        for q in qs {
            data.extend(self.row(q)?);
        }
        Matrix::new(qs.len(), self.schema.len(), data)
    }

    pub fn dataset(&self, samples: &[&Sample]) -> Result<Dataset> {
        let qs: Vec<&QuantitySet> = samples.iter().map(|s| &s.quantities).collect();
        Dataset::new(
            self.matrix(&qs)?,
            samples.iter().map(|s| s.cost).collect(),
            self.schema.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    pub reference: GroupReference,
    pub model: GbdtModel,
}

impl GroupModel {
    pub fn pipeline(&self) -> GroupPipeline {
        GroupPipeline::from_reference(self.reference.clone())
    }

    pub fn predict(&self, qs: &QuantitySet) -> Result<f64> {
        let fv = featurize(qs, Some(&self.reference))?;
        Ok(self.model.predict(&fv.values))
    }
}

pub const BUNDLE_FORMAT: &str = "cadcost-bundle/1";

/// One reference + regressor per product group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub format: String,
    pub groups: BTreeMap<String, GroupModel>,
}

impl CostModel {
    pub fn group(&self, name: &str) -> Result<&GroupModel> {
        self.groups.get(name).ok_or_else(|| {
            Error::schema(format!(
                "model has no group {name:?} (known: {})",
                self.groups.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn predict(&self, qs: &QuantitySet) -> Result<f64> {
        self.group(&qs.group)?.predict(qs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        if model.format != BUNDLE_FORMAT {
            return Err(Error::schema(format!("unknown model bundle format {:?}", model.format)));
        }
        for g in model.groups.values() {
            g.reference.validate()?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub n: usize,
    pub mae: Option<f64>,
    pub mape: Option<f64>,
}

impl SplitScore {
    fn compute(y: &[f64], pred: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Ok(Self {
                n: 0,
                mae: None,
                mape: None,
            });
        }
        Ok(Self {
            n: y.len(),
            mae: Some(mae(y, pred)?),
            mape: Some(mape(y, pred)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub train: SplitScore,
    pub valid: SplitScore,
    pub test: SplitScore,
    pub best_iteration: usize,
    pub n_trees: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub source_id: String,
    pub group: String,
    pub split: SplitName,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: CostModel,
    pub reports: Vec<GroupReport>,
    pub predictions: Vec<Prediction>,
}

/// Groups samples by product group, in sorted group order.
pub fn by_group(samples: &[Sample]) -> BTreeMap<String, Vec<Sample>> {
    let mut out: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        out.entry(s.quantities.group.clone())
            .or_default()
            .push(s.clone());
    }
    out
}

/// Trains one group: seeded train/valid/test split, reference fit on the
/// training part, boosting with early stopping on the validation part.
pub fn train_group(
    samples: &[Sample],
    lexicon: &MaterialLexicon,
    params: &TrainParams,
    split: &SplitSpec,
    metric: Metric,
) -> Result<(GroupModel, GroupReport, Vec<Prediction>)> {
    let group = samples
        .first()
        .map(|s| s.quantities.group.clone())
        .ok_or_else(|| Error::invalid("no samples to train on"))?;
    if let Some(bad) = samples.iter().find(|s| !(s.cost > 0.0) || !s.cost.is_finite()) {
        return Err(Error::invalid(format!(
            "cost of {} must be positive, got {}",
            bad.quantities.source_id, bad.cost
        )));
    }
    let part = split_dataset(samples.len(), split)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>();
    let (train, valid, test) = (pick(&part.train), pick(&part.valid), pick(&part.test));

    let pipeline = GroupPipeline::fit(
        &train.iter().map(|s| &s.quantities).collect::<Vec<_>>(),
        lexicon,
    )?;
    let train_set = pipeline.dataset(&train)?;
    let valid_set = pipeline.dataset(&valid)?;
    let test_set = pipeline.dataset(&test)?;
    let model = fit_gbdt(
        &train_set,
        (!valid_set.is_empty()).then_some(&valid_set),
        params,
        metric,
    )?;

    let mut predictions = Vec::with_capacity(samples.len());
    let mut scores = Vec::with_capacity(3);
    for (name, set, rows) in [
        (SplitName::Train, &train_set, &train),
        (SplitName::Valid, &valid_set, &valid),
        (SplitName::Test, &test_set, &test),
    ] {
        let pred = model.predict_matrix(&set.features)?;
        scores.push(SplitScore::compute(&set.targets, &pred)?);
        for (s, p) in rows.iter().zip(&pred) {
            predictions.push(Prediction {
                source_id: s.quantities.source_id.clone(),
                group: group.clone(),
                split: name,
                actual: s.cost,
                predicted: *p,
            });
        }
    }
    let [train_score, valid_score, test_score]: [SplitScore; 3] =
        scores.try_into().expect("three splits");
    let report = GroupReport {
        group,
        train: train_score,
        valid: valid_score,
        test: test_score,
        best_iteration: model.best_iteration,
        n_trees: model.trees.len(),
    };
    Ok((
        GroupModel {
            reference: pipeline.reference,
            model,
        },
        report,
        predictions,
    ))
}

pub fn train_all(
    samples: &[Sample],
    lexicon: &MaterialLexicon,
    params: &TrainParams,
    split: &SplitSpec,
    metric: Metric,
) -> Result<TrainOutcome> {
    let mut groups = BTreeMap::new();
    let mut reports = Vec::new();
    let mut predictions = Vec::new();
    for (name, group_samples) in by_group(samples) {
        let (gm, report, preds) = train_group(&group_samples, lexicon, params, split, metric)?;
        groups.insert(name, gm);
        reports.push(report);
        predictions.extend(preds);
    }
    Ok(TrainOutcome {
        model: CostModel {
            format: BUNDLE_FORMAT.into(),
            groups,
        },
        reports,
        predictions,
    })
}

/// Test-set MAE/MAPE pooled over all groups.
pub fn pooled_test_scores(predictions: &[Prediction]) -> Result<SplitScore> {
    let (y, p): (Vec<f64>, Vec<f64>) = predictions
        .iter()
        .filter(|p| p.split == SplitName::Test)
        .map(|p| (p.actual, p.predicted))
        .unzip();
    SplitScore::compute(&y, &p)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Evaluation CSV: `group,model,n,mae,mape`, one test-split row per group.
pub fn write_evaluation_csv<W: Write>(out: W, reports: &[GroupReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "model", "n", "mae", "mape"])?;
    for r in reports {
        w.write_record([
            r.group.clone(),
            "gbdt".into(),
            r.test.n.to_string(),
            opt(r.test.mae),
            opt(r.test.mape),
        ])?;
    }
    flush(w)
}

/// Scatter CSV: `actual,predicted,group` for test rows.
pub fn write_scatter_csv<W: Write>(out: W, predictions: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["actual", "predicted", "group"])?;
    for p in predictions.iter().filter(|p| p.split == SplitName::Test) {
        w.write_record([p.actual.to_string(), p.predicted.to_string(), p.group.clone()])?;
    }
    flush(w)
}

pub fn summary_text(reports: &[GroupReport]) -> String {
    let fmt = |s: &SplitScore| match (s.mae, s.mape) {
        (Some(a), Some(p)) => format!("n={:<5} MAE={a:.4} MAPE={p:.2}%", s.n),
        _ => format!("n={:<5} (empty)", s.n),
    };
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!(
            "group {}\n  trees: {} (best iteration {})\n  train: {}\n  valid: {}\n  test:  {}\n",
            r.group,
            r.n_trees,
            r.best_iteration,
            fmt(&r.train),
            fmt(&r.valid),
            fmt(&r.test)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub source_id: String,
    pub group: String,
    pub cost: f64,
}

pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["source_id", "group", "cost"])?;
    for l in labels {
        w.write_record([l.source_id.clone(), l.group.clone(), l.cost.to_string()])?;
    }
    flush(w)
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(format!("label file lacks column {name:?}")))
    };
    let (ci, cg, cc) = (col("source_id")?, col("group")?, col("cost")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let cost: f64 = rec[cc]
            .trim()
            .parse()
            .map_err(|_| Error::schema(format!("unparseable cost {:?}", &rec[cc])))?;
        let label = Label {
            source_id: rec[ci].to_string(),
            group: rec[cg].to_string(),
            cost,
        };
        out.insert(label.source_id.clone(), label);
    }
    Ok(out)
}

const TRAILING_COLUMNS: [&str; 3] = ["group", "cost", "source_id"];

/// Feature CSV: schema columns, then `group,cost,source_id`. Missing
/// values are empty cells.
pub fn write_feature_table<W: Write>(out: W, rows: &[FeatureVector]) -> Result<()> {
    let schema: Vec<String> = match rows.first() {
        Some(r) => r.values.keys().cloned().collect(),
        None => feature_schema(&[]),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = schema.clone();
    header.extend(TRAILING_COLUMNS.map(String::from));
    w.write_record(&header)?;
    for row in rows {
        if row.values.len() != schema.len() || !row.values.keys().zip(&schema).all(|(a, b)| a == b) {
            return Err(Error::schema(format!(
                "row {} does not follow the table schema",
                row.source_id
            )));
        }
        let mut rec: Vec<String> = row.values.values().map(|v| opt(*v)).collect();
        rec.push(row.group.clone());
        rec.push(opt(row.cost));
        rec.push(row.source_id.clone());
        w.write_record(&rec)?;
    }
    flush(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

/// Reads a feature CSV and checks its header against the canonical schema
/// for the material columns it carries.
pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let n = header.len();
    if n < 3 || header[n - 3..] != TRAILING_COLUMNS.map(String::from) {
        return Err(Error::schema(format!(
            "{}: feature table must end with group,cost,source_id",
            path.display()
        )));
    }
    let schema = header[..n - 3].to_vec();
    let vocab: Vec<String> = schema
        .iter()
        .filter_map(|c| c.strip_prefix("mat_").map(String::from))
        .collect();
    if schema != feature_schema(&vocab) {
        return Err(Error::schema(format!(
            "{}: feature columns differ from the canonical schema",
            path.display()
        )));
    }
    let parse = |cell: &str, what: &str| -> Result<Option<f64>> {
        if cell.trim().is_empty() {
            return Ok(None);
        }
        cell.trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::schema(format!("unparseable {what} value {cell:?}")))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut values = indexmap::IndexMap::with_capacity(schema.len());
        for (name, cell) in schema.iter().zip(rec.iter()) {
            values.insert(name.clone(), parse(cell, name)?);
        }
        rows.push(FeatureVector {
            source_id: rec[n - 1].to_string(),
            group: rec[n - 3].to_string(),
            values,
            cost: parse(&rec[n - 2], "cost")?,
        });
    }
    Ok(FeatureTable { schema, rows })
}

/// Sidecar path holding the quantity sets behind a feature table.
pub fn quantities_path(feature_csv: &Path) -> PathBuf {
    let mut name = feature_csv
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".quantities.jsonl");
    feature_csv.with_file_name(name)
}

pub fn write_quantities(path: &Path, sets: &[QuantitySet]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for qs in sets {
        serde_json::to_writer(&mut w, qs)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_quantities(path: &Path) -> Result<Vec<QuantitySet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Joins quantity sets with labels by source id. The label's group wins.
/// Sets without a label are skipped.
pub fn attach_labels(sets: Vec<QuantitySet>, labels: &BTreeMap<String, Label>) -> Vec<Sample> {
    sets.into_iter()
        .filter_map(|mut qs| {
            let label = labels.get(&qs.source_id)?;
            qs.group = label.group.clone();
            Some(Sample {
                quantities: qs,
                cost: label.cost,
            })
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct DirectoryExtraction {
    pub quantities: Vec<QuantitySet>,
    /// Files that could not be parsed at all.
    pub failures: Vec<(PathBuf, String)>,
    /// Entities rejected inside otherwise parsed files.
    pub diagnostics: Vec<(String, Diagnostic)>,
}

/// `.dxf` files directly inside `dir`, sorted by name.
pub fn list_dxf_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("dxf"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Parses every DXF file in `dir` into quantity sets. `group_of` maps a
/// source id (file stem) to its product group.
pub fn extract_directory(
    dir: &Path,
    lexicon: &MaterialLexicon,
    group_of: impl Fn(&str) -> String,
) -> Result<DirectoryExtraction> {
    let mut out = DirectoryExtraction::default();
    for path in list_dxf_files(dir)? {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match read_drawing(&path, &group_of(&stem)) {
            Ok(parsed) => {
                out.diagnostics.extend(
                    parsed
                        .diagnostics
                        .iter()
                        .map(|d| (parsed.drawing.source_id.clone(), d.clone())),
                );
                out.quantities
                    .push(extract_quantities(&parsed.drawing, lexicon));
            }
            Err(e) => out.failures.push((path, e.to_string())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, group: &str, lines: &[f64], cost: f64) -> Sample {
        let mut q = QuantitySet::empty(id, group);
        q.line_lengths = lines.to_vec();
        Sample { quantities: q, cost }
    }

    #[test]
    fn constant_cost_gives_zero_test_mape() {
        let samples: Vec<Sample> = (0..40)
            .map(|i| sample(&format!("s{i}"), "g", &[i as f64, 2.0 * i as f64], 4.2))
            .collect();
        let out = train_all(
            &samples,
            &MaterialLexicon::default(),
            &TrainParams::default(),
            &SplitSpec::default(),
            Metric::Mape,
        )
        .unwrap();
        assert_eq!(out.reports[0].test.mape, Some(0.0));
        assert_eq!(pooled_test_scores(&out.predictions).unwrap().mape, Some(0.0));
    }

    #[test]
    fn feature_table_round_trip_and_schema_check() {
        let q = sample("a", "g", &[1.0, 3.0], 1.0).quantities;
        let mut fv = featurize(&q, None).unwrap();
        fv.cost = Some(2.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_feature_table(File::create(&path).unwrap(), &[fv.clone()]).unwrap();
        let table = read_feature_table(&path).unwrap();
        assert_eq!(table.rows, vec![fv]);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen("line_count", "line_total", 1)).unwrap();
        assert!(matches!(read_feature_table(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn quantities_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("features.csv");
        let side = quantities_path(&csv);
        assert_eq!(side.file_name().unwrap(), "features.quantities.jsonl");
        let sets = vec![
            sample("a", "g", &[0.1, 0.2], 1.0).quantities,
            sample("b", "h", &[], 1.0).quantities,
        ];
        write_quantities(&side, &sets).unwrap();
        assert_eq!(read_quantities(&side).unwrap(), sets);
    }

    #[test]
    fn unknown_group_is_schema_error() {
        let samples: Vec<Sample> = (0..10)
            .map(|i| sample(&format!("s{i}"), "g", &[i as f64], 1.0 + i as f64))
            .collect();
        let out = train_all(
            &samples,
            &MaterialLexicon::default(),
            &TrainParams::default(),
            &SplitSpec::default(),
            Metric::Mape,
        )
        .unwrap();
        let q = sample("x", "other", &[1.0], 1.0).quantities;
        assert!(matches!(out.model.predict(&q), Err(Error::Schema(_))));
    }
}
