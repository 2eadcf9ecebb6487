//! Loading and saving helpers shared by the subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cadcost::dxf::MaterialLexicon;
use cadcost::gbdt::TrainParams;
use cadcost::pipeline::{
    quantities_path, read_feature_table, read_labels, read_quantities, Sample,
};
use cadcost::synth::SynthConfig;
use cadcost::{Error, Result};
use serde_json::Value;

use crate::ParamArgs;

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_lexicon(path: Option<&Path>) -> Result<MaterialLexicon> {
    path.map_or_else(|| Ok(MaterialLexicon::default()), MaterialLexicon::load)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Overlays the keys of a JSON object file on `base`.
fn overlay(mut base: Value, path: &Path) -> Result<Value> {
    let file = read_json(path)?;
    let Value::Object(over) = file else {
        return Err(Error::InvalidInput(format!(
            "{}: expected a JSON object",
            path.display()
        )));
    };
    let obj = base.as_object_mut().expect("struct serializes to an object");
    for (k, v) in over {
        obj.insert(k, v);
    }
    Ok(base)
}

/// Flags first, then the `--params` file on top.
pub fn resolve_params(args: &ParamArgs) -> Result<TrainParams> {
    let mut p = TrainParams {
        seed: args.seed,
        ..TrainParams::default()
    };
    if let Some(v) = args.learning_rate {
        p.learning_rate = v;
    }
    if let Some(v) = args.max_depth {
        p.max_depth = v;
    }
    if let Some(v) = args.n_estimators {
        p.n_estimators = v;
    }
    if let Some(v) = args.early_stopping_rounds {
        p.early_stopping_rounds = v;
    }
    if let Some(path) = &args.params {
        p = serde_json::from_value(overlay(serde_json::to_value(&p)?, path)?)?;
    }
    p.validate()?;
    Ok(p)
}

pub fn resolve_synth(
    config: Option<&Path>,
    n: Option<usize>,
    noise_pct: Option<f64>,
    seed: Option<u64>,
) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    if let Some(v) = n {
        cfg.n_drawings = v;
    }
    if let Some(v) = noise_pct {
        cfg.noise_pct = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(path) = config {
        cfg = serde_json::from_value(overlay(serde_json::to_value(&cfg)?, path)?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Labelled samples behind a feature table: the table is schema-checked,
/// quantities come from its sidecar, costs and groups from `labels` when
/// given, otherwise from the table.
pub fn load_samples(features: &Path, labels: Option<&Path>) -> Result<Vec<Sample>> {
    let table = read_feature_table(features)?;
    let sidecar = quantities_path(features);
    if !sidecar.exists() {
        return Err(Error::Schema(format!(
            "{} has no quantity sidecar {}; re-run featurize",
            features.display(),
            sidecar.display()
        )));
    }
    let quantities = read_quantities(&sidecar)?;
    let ids: Vec<&str> = table.rows.iter().map(|r| r.source_id.as_str()).collect();
    let qids: Vec<&str> = quantities.iter().map(|q| q.source_id.as_str()).collect();
    if ids != qids {
        return Err(Error::Schema(format!(
            "{} and its sidecar list different drawings",
            features.display()
        )));
    }
    let labels = labels.map(read_labels).transpose()?;
    let mut samples = Vec::with_capacity(quantities.len());
    for (mut qs, row) in quantities.into_iter().zip(&table.rows) {
        let cost = match &labels {
            Some(l) => match l.get(&qs.source_id) {
                Some(label) => {
                    qs.group = label.group.clone();
                    Some(label.cost)
                }
                None => None,
            },
            None => row.cost,
        };
        if let Some(cost) = cost {
            samples.push(Sample {
                quantities: qs,
                cost,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no labelled rows",
            features.display()
        )));
    }
    Ok(samples)
}

/// Lexicon of every material found in the samples, sorted.
pub fn observed_lexicon(samples: &[Sample]) -> MaterialLexicon {
    let names: BTreeSet<&String> = samples
        .iter()
        .flat_map(|s| s.quantities.materials.iter())
        .collect();
    MaterialLexicon::new(names)
}

pub fn lexicon_or_observed(path: Option<&Path>, samples: &[Sample]) -> Result<MaterialLexicon> {
    match path {
        Some(p) => MaterialLexicon::load(p),
        None => Ok(observed_lexicon(samples)),
    }
}

/// Samples of one group. Without a name the data must hold a single group.
pub fn select_group(samples: Vec<Sample>, group: Option<&str>) -> Result<(String, Vec<Sample>)> {
    let mut by: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        by.entry(s.quantities.group.clone()).or_default().push(s);
    }
    match group {
        Some(g) => by
            .remove_entry(g)
            .ok_or_else(|| Error::InvalidInput(format!("no rows for group {g:?}"))),
        None if by.len() == 1 => Ok(by.into_iter().next().expect("one group")),
        None => Err(Error::InvalidInput(format!(
            "data holds groups {}; pick one with --group",
            by.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn report_dir(explicit: Option<&PathBuf>, model: &Path) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        model
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    })
}

/// File-name-safe form of a group name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
