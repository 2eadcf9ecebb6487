use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use cadcost::dxf::{extract_quantities, read_drawing, MaterialLexicon};
use cadcost::evaluate::{grid_search, mae, mape, random_search, Metric, SearchSpace, SplitSpec};
use cadcost::explain::{
    background_sample, permutation_importance, shapley_mean_abs, ImportanceReport,
    DEFAULT_BACKGROUND_ROWS, MAX_SHAPLEY_FEATURES,
};
use cadcost::features;
use cadcost::gbdt::{fit_cart, TrainParams};
use cadcost::group_ref::GroupReference;
use cadcost::pipeline::{
    extract_directory, list_dxf_files, pooled_test_scores, quantities_path, read_feature_table,
    read_labels, read_quantities, summary_text, train_all, write_evaluation_csv,
    write_feature_table, write_quantities, write_scatter_csv, CostModel, Sample,
};
use cadcost::synth::generate_corpus;
use cadcost::{explain, Error, Result};

use crate::data::*;
use crate::{
    EvaluateArgs, ExplainArgs, FeaturizeArgs, GridArgs, PredictArgs, SynthArgs, TrainArgs,
    TuneArgs,
};

enum References {
    None,
    One(GroupReference),
    Bundle(CostModel),
}

impl References {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        if let Ok(r) = serde_json::from_str::<GroupReference>(&text) {
            r.validate()?;
            return Ok(References::One(r));
        }
        Ok(References::Bundle(CostModel::load(path)?))
    }

    fn get(&self, group: &str) -> Result<Option<&GroupReference>> {
        match self {
            References::None => Ok(None),
            References::One(r) => Ok(Some(r)),
            References::Bundle(m) => Ok(Some(&m.group(group)?.reference)),
        }
    }
}

pub fn featurize(a: FeaturizeArgs) -> Result<()> {
    let lexicon = load_lexicon(a.lexicon.as_deref())?;
    let labels = a.labels.as_deref().map(read_labels).transpose()?.unwrap_or_default();
    let references = match &a.reference {
        Some(p) => References::load(p)?,
        None => References::None,
    };
    let n_files = list_dxf_files(&a.dxf_dir)?.len();
    if n_files == 0 {
        return Err(Error::InvalidInput(format!(
            "{} contains no .dxf files",
            a.dxf_dir.display()
        )));
    }
    let ex = extract_directory(&a.dxf_dir, &lexicon, |id| {
        labels.get(id).map_or_else(|| a.group.clone(), |l| l.group.clone())
    })?;

    let mut log = String::new();
    for (path, err) in &ex.failures {
        let _ = writeln!(log, "{}: skipped: {err}", path.display());
    }
    for (id, d) in &ex.diagnostics {
        let _ = writeln!(
            log,
            "{id}: entity {} ({}): {}",
            d.entity_index, d.entity_type, d.message
        );
    }
    match &a.log {
        Some(p) => write_text(p, &log)?,
        None => eprint!("{log}"),
    }
    if ex.quantities.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("none of the {n_files} files in {} parsed", a.dxf_dir.display()),
        });
    }

    let mut rows = Vec::with_capacity(ex.quantities.len());
    for qs in &ex.quantities {
        let mut fv = features::featurize(qs, references.get(&qs.group)?)?;
        fv.cost = labels.get(&qs.source_id).map(|l| l.cost);
        rows.push(fv);
    }
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| !r.values.keys().eq(first.values.keys())) {
            return Err(Error::Schema(
                "group references differ in material vocabulary; featurize one group at a time"
                    .into(),
            ));
        }
    }
    write_feature_table(create(&a.out)?, &rows)?;
    write_quantities(&quantities_path(&a.out), &ex.quantities)?;
    eprintln!(
        "featurized {} of {n_files} files ({} entity diagnostics)",
        rows.len(),
        ex.diagnostics.len()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let samples = load_samples(&a.features, a.labels.as_deref())?;
    let lexicon = lexicon_or_observed(a.lexicon.as_deref(), &samples)?;
    let params = resolve_params(&a.params)?;
    let split = SplitSpec {
        train: a.split[0],
        valid: a.split[1],
        test: a.split[2],
        seed: a.params.seed,
    };
    let metric: Metric = a.metric.parse()?;
    let out = train_all(&samples, &lexicon, &params, &split, metric)?;
    ensure_parent(&a.out)?;
    out.model.save(&a.out)?;

    let dir = report_dir(a.report_dir.as_ref(), &a.out);
    write_evaluation_csv(create(&dir.join("evaluation.csv"))?, &out.reports)?;
    write_scatter_csv(create(&dir.join("scatter.csv"))?, &out.predictions)?;
    let mut w = csv::Writer::from_writer(create(&dir.join("predictions.csv"))?);
    w.write_record(["source_id", "group", "split", "actual", "predicted"])?;
    for p in &out.predictions {
        let split = serde_json::to_value(p.split)?;
        w.write_record([
            p.source_id.clone(),
            p.group.clone(),
            split.as_str().unwrap_or_default().to_string(),
            p.actual.to_string(),
            p.predicted.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(&dir, e))?;
    for (name, gm) in &out.model.groups {
        gm.reference
            .save(&dir.join(format!("reference_{}.json", slug(name))))?;
    }

    print!("{}", summary_text(&out.reports));
    let pooled = pooled_test_scores(&out.predictions)?;
    if let (Some(m), Some(p)) = (pooled.mae, pooled.mape) {
        println!("all groups test: n={} MAE={m:.4} MAPE={p:.2}%", pooled.n);
    }
    Ok(())
}

fn model_lexicon(model: &CostModel) -> MaterialLexicon {
    MaterialLexicon::new(
        model
            .groups
            .values()
            .flat_map(|g| g.reference.vocabulary.iter().cloned()),
    )
}

fn default_group(model: &CostModel, group: Option<&str>) -> Result<String> {
    match group {
        Some(g) => Ok(model.group(g).map(|_| g.to_string())?),
        None if model.groups.len() == 1 => Ok(model.groups.keys().next().cloned().expect("one")),
        None => Err(Error::InvalidInput(format!(
            "model has groups {}; pick one with --group",
            model.groups.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = CostModel::load(&a.model)?;
    let mut results: Vec<(String, String, f64)> = Vec::new();
    if let Some(features) = &a.features {
        let sidecar = quantities_path(features);
        if sidecar.exists() {
            for mut qs in read_quantities(&sidecar)? {
                if let Some(g) = &a.group {
                    qs.group = g.clone();
                }
                let p = model.predict(&qs)?;
                results.push((qs.source_id, qs.group, p));
            }
        } else {
            for row in read_feature_table(features)?.rows {
                let group = a.group.clone().unwrap_or(row.group);
                let p = model.group(&group)?.model.predict(&row.values);
                results.push((row.source_id, group, p));
            }
        }
    } else if !a.dxf.is_empty() {
        let group = default_group(&model, a.group.as_deref())?;
        let lexicon = model_lexicon(&model);
        for path in &a.dxf {
            let parsed = read_drawing(path, &group)?;
            let qs = extract_quantities(&parsed.drawing, &lexicon);
            let p = model.predict(&qs)?;
            results.push((qs.source_id, group.clone(), p));
        }
    } else {
        return Err(Error::InvalidInput("pass --dxf or --features".into()));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["source_id", "group", "predicted"])?;
    for (id, g, p) in &results {
        w.write_record([id.as_str(), g.as_str(), &p.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");
    let mut drivers = String::new();
    if a.top_k > 0 {
        let groups: std::collections::BTreeSet<&String> = results.iter().map(|r| &r.1).collect();
        for g in groups {
            let report = ImportanceReport::split_count(&model.group(g)?.model);
            let _ = writeln!(drivers, "top drivers for group {g} (split count):");
            for (f, w) in report.top(a.top_k) {
                let _ = writeln!(drivers, "  {f}\t{w:.4}");
            }
        }
    }
    match &a.out {
        Some(p) => {
            write_text(p, &text)?;
            print!("{drivers}");
        }
        None => {
            print!("{text}");
            eprint!("{drivers}");
        }
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = CostModel::load(&a.model)?;
    let samples = load_samples(&a.features, a.labels.as_deref())?;
    let mut by: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let (mut all_y, mut all_p) = (Vec::new(), Vec::new());
    for s in &samples {
        let p = model.predict(&s.quantities)?;
        let e = by.entry(s.quantities.group.clone()).or_default();
        e.0.push(s.cost);
        e.1.push(p);
        all_y.push(s.cost);
        all_p.push(p);
    }
    let mut text = String::from("group,n,mae,mape\n");
    for (g, (y, p)) in by.iter().chain([(&"all".to_string(), &(all_y, all_p))]) {
        let _ = writeln!(text, "{g},{},{},{}", y.len(), mae(y, p)?, mape(y, p)?);
    }
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn search_samples(data: &crate::SearchData) -> Result<(String, Vec<Sample>, MaterialLexicon)> {
    let samples = load_samples(&data.features, data.labels.as_deref())?;
    let lexicon = lexicon_or_observed(data.lexicon.as_deref(), &samples)?;
    let (group, samples) = select_group(samples, data.group.as_deref())?;
    Ok((group, samples, lexicon))
}

pub fn tune(a: TuneArgs) -> Result<()> {
    let (group, samples, lexicon) = search_samples(&a.data)?;
    let base = resolve_params(&a.params)?;
    let space = match &a.space {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text)?
        }
        None => SearchSpace::standard(),
    };
    let result = random_search(
        &samples,
        &lexicon,
        &space,
        &base,
        a.trials,
        a.data.folds,
        a.params.seed,
        true,
    )?;
    result.write_csv(create(&a.out)?, &space)?;
    if let Some(p) = &a.best_out {
        write_text(p, &(serde_json::to_string_pretty(&result.best.params)? + "\n"))?;
    }
    println!(
        "group {group}: best trial {} cv MAPE={:.2}% MAE={:.4}",
        result.best.index, result.best.cv_mape, result.best.cv_mae
    );
    Ok(())
}

pub fn grid(a: GridArgs) -> Result<()> {
    let (group, samples, lexicon) = search_samples(&a.data)?;
    let base = resolve_params(&a.params)?;
    let result = grid_search(
        &samples,
        &lexicon,
        &a.depths,
        &a.learning_rates,
        &base,
        a.data.folds,
        a.params.seed,
    )?;
    result.write_csv(create(&a.out)?)?;
    println!(
        "group {group}: best max_depth={} learning_rate={} cv MAE={:.4}",
        result.best.depth, result.best.lr, result.best.mean_mae
    );
    Ok(())
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    let model = CostModel::load(&a.model)?;
    let groups: Vec<String> = match &a.group {
        Some(g) => vec![default_group(&model, Some(g))?],
        None => model.groups.keys().cloned().collect(),
    };
    let samples = match &a.features {
        Some(f) => Some(load_samples(f, a.labels.as_deref())?),
        None => None,
    };
    for name in groups {
        let gm = model.group(&name)?;
        let dir = a.out_dir.join(slug(&name));
        let split = ImportanceReport::split_count(&gm.model);
        split.write_csv(create(&dir.join("split_count.csv"))?)?;
        println!("group {name}: top split-count features");
        for (f, w) in split.top(5) {
            println!("  {f}\t{w:.4}");
        }

        let Some(samples) = &samples else { continue };
        let rows: Vec<&Sample> = samples
            .iter()
            .filter(|s| s.quantities.group == name)
            .collect();
        if rows.is_empty() {
            eprintln!("group {name}: no labelled rows, skipping data-based explanations");
            continue;
        }
        let data = gm.pipeline().dataset(&rows)?;

        let perm = permutation_importance(
            &gm.model,
            &data.features,
            &data.targets,
            Metric::Mae,
            a.repeats,
            a.seed,
        )?;
        perm.write_csv(create(&dir.join("permutation.csv"))?)?;
        println!("group {name}: top permutation features");
        for (f, w) in perm.top(5) {
            println!("  {f}\t{w:.4}");
        }

        if a.shap_rows > 0 {
            let k = a.shap_features.min(MAX_SHAPLEY_FEATURES);
            let active: Vec<usize> = split
                .top(k)
                .iter()
                .filter_map(|(f, _)| gm.model.schema.iter().position(|s| s == f))
                .collect();
            let background = background_sample(&data.features, DEFAULT_BACKGROUND_ROWS, a.seed);
            let n = a.shap_rows.min(data.features.n_rows());
            let explained = data
                .features
                .select_rows(&(0..n).collect::<Vec<_>>());
            let shap = shapley_mean_abs(&gm.model, &explained, &background, Some(&active))?;
            shap.write_csv(create(&dir.join("shapley.csv"))?)?;
        }

        let tree = fit_cart(
            &data,
            &TrainParams {
                max_depth: a.tree_depth,
                ..TrainParams::default()
            },
        )?;
        let export = explain::export_tree(&tree, &data.features, &data.targets)?;
        write_text(&dir.join("tree.dot"), &export.dot)?;
        write_text(&dir.join("tree.txt"), &export.text)?;
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = resolve_synth(a.config.as_deref(), a.n, a.noise_pct, a.seed)?;
    let paths = generate_corpus(&cfg, &a.out)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "wrote {} drawings, {} and {} to {}",
        paths.dxf_files.len(),
        paths.labels.display(),
        paths.lexicon.display(),
        a.out.display()
    );
    Ok(())
}

