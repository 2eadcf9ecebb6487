//! Synthetic labelled DXF corpus with a known cost function.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dxf::{
    write_dxf, ArcEntity, CircleEntity, DimensionEntity, DimensionKind, Drawing, EllipseEntity,
    LineEntity, MaterialLexicon, Point2, QuantitySet, SplineEntity,
};
use crate::error::{Error, Result};
use crate::pipeline::{write_labels, Label};

pub const COST_MIN: f64 = 0.50;
pub const COST_MAX: f64 = 50.00;
/// Lower bound of the multiplicative noise factor, keeps costs positive.
pub const MIN_NOISE_FACTOR: f64 = 0.01;

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn check(&self, what: &str, positive: bool) -> Result<()> {
        let ok = self.min.is_finite() && self.max.is_finite() && self.min <= self.max;
        if !ok || (positive && self.min <= 0.0) {
            return Err(Error::invalid(format!(
                "synth range {what} [{}, {}] is invalid",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Entity mix of one synthetic product group. Sizes are real-world units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupTemplate {
    pub name: String,
    pub lines: CountRange,
    pub line_length: Range,
    pub arcs: CountRange,
    pub arc_radius: Range,
    /// Arc span in degrees, within `(0, 360)`.
    pub arc_span: Range,
    pub circles: CountRange,
    pub circle_radius: Range,
    pub ellipses: CountRange,
    pub splines: CountRange,
    /// Rotated dimensions; the first one always encodes the drawing scale.
    pub rotated_dims: CountRange,
    pub rotated_length: Range,
    pub angular_dims: CountRange,
    pub diametric_dims: CountRange,
    pub radial_dims: CountRange,
    /// Chance that a rotated, diametric or radial dimension carries a ± tolerance.
    pub tolerance_probability: f64,
    pub tolerances: Vec<f64>,
    /// Real-world units per drawing unit, one picked per drawing.
    pub scales: Vec<f64>,
}

impl GroupTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("synth group name is empty"));
        }
        for (what, c) in [
            ("lines", self.lines),
            ("arcs", self.arcs),
            ("circles", self.circles),
            ("ellipses", self.ellipses),
            ("splines", self.splines),
            ("rotated_dims", self.rotated_dims),
            ("angular_dims", self.angular_dims),
            ("diametric_dims", self.diametric_dims),
            ("radial_dims", self.radial_dims),
        ] {
            if c.min > c.max {
                return Err(Error::invalid(format!("synth count range {what} has min > max")));
            }
        }
        if self.rotated_dims.min == 0 {
            return Err(Error::invalid("synth templates need at least one rotated dimension"));
        }
        self.line_length.check("line_length", true)?;
        self.arc_radius.check("arc_radius", true)?;
        self.circle_radius.check("circle_radius", true)?;
        self.rotated_length.check("rotated_length", true)?;
        self.arc_span.check("arc_span", true)?;
        if self.arc_span.max >= 360.0 {
            return Err(Error::invalid("synth arc_span must stay below 360 degrees"));
        }
        if !(0.0..=1.0).contains(&self.tolerance_probability) {
            return Err(Error::invalid("synth tolerance_probability must lie in [0, 1]"));
        }
        if self.tolerance_probability > 0.0 && self.tolerances.is_empty() {
            return Err(Error::invalid("synth tolerances list is empty"));
        }
        if self.tolerances.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("synth tolerances must be finite and non-negative"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("synth scales must be a non-empty list of positive numbers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    pub multiplier: f64,
}

/// Coefficients of the pre-clamp linear cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCoefficients {
    pub base: f64,
    /// Per unit of the largest rotated dimension.
    pub rotated_max: f64,
    /// Per degree of mean arc span.
    pub arc_angle_mean: f64,
    pub ellipse_count: f64,
    /// Per unit of circle radius standard deviation.
    pub circle_radius_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_drawings: usize,
    pub groups: Vec<GroupTemplate>,
    /// Standard deviation of the relative cost noise.
    pub noise_pct: f64,
    pub materials: Vec<MaterialSpec>,
    pub cost: CostCoefficients,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let bracket = GroupTemplate {
            name: "bracket".into(),
            lines: CountRange::new(4, 16),
            line_length: Range::new(5.0, 150.0),
            arcs: CountRange::new(1, 6),
            arc_radius: Range::new(2.0, 40.0),
            arc_span: Range::new(15.0, 345.0),
            circles: CountRange::new(2, 6),
            circle_radius: Range::new(1.5, 30.0),
            ellipses: CountRange::new(0, 4),
            splines: CountRange::new(0, 2),
            rotated_dims: CountRange::new(1, 4),
            rotated_length: Range::new(10.0, 300.0),
            angular_dims: CountRange::new(0, 2),
            diametric_dims: CountRange::new(0, 3),
            radial_dims: CountRange::new(0, 2),
            tolerance_probability: 0.3,
            tolerances: vec![0.02, 0.05, 0.1, 0.2],
            scales: vec![1.0, 2.0, 5.0],
        };
        let link = GroupTemplate {
            name: "link".into(),
            lines: CountRange::new(2, 10),
            line_length: Range::new(10.0, 250.0),
            arcs: CountRange::new(2, 6),
            arc_radius: Range::new(5.0, 60.0),
            arc_span: Range::new(20.0, 340.0),
            circles: CountRange::new(3, 7),
            circle_radius: Range::new(3.0, 35.0),
            ellipses: CountRange::new(0, 4),
            splines: CountRange::new(0, 3),
            rotated_dims: CountRange::new(1, 3),
            rotated_length: Range::new(20.0, 320.0),
            angular_dims: CountRange::new(0, 1),
            diametric_dims: CountRange::new(1, 3),
            radial_dims: CountRange::new(0, 2),
            tolerance_probability: 0.4,
            tolerances: vec![0.05, 0.1, 0.3],
            scales: vec![0.5, 1.0, 2.0, 4.0],
        };
        Self {
            n_drawings: 800,
            groups: vec![bracket, link],
            noise_pct: 0.05,
            materials: vec![
                MaterialSpec { name: "S235JR".into(), multiplier: 0.95 },
                MaterialSpec { name: "C45".into(), multiplier: 1.0 },
                MaterialSpec { name: "AlMgSi1".into(), multiplier: 1.05 },
            ],
            cost: CostCoefficients {
                base: 2.0,
                rotated_max: 0.05,
                arc_angle_mean: 0.05,
                ellipse_count: 2.0,
                circle_radius_std: 1.0,
            },
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_drawings == 0 {
            return Err(Error::invalid("synth n_drawings must be at least 1"));
        }
        if !(self.noise_pct.is_finite() && self.noise_pct >= 0.0) {
            return Err(Error::invalid("synth noise_pct must be non-negative"));
        }
        if self.groups.is_empty() {
            return Err(Error::invalid("synth config has no group templates"));
        }
        for g in &self.groups {
            g.validate()?;
        }
        if self.materials.is_empty() {
            return Err(Error::invalid("synth config has no materials"));
        }
        for m in &self.materials {
            if m.name.trim().is_empty() || !m.name.chars().all(|c| c.is_alphanumeric()) {
                return Err(Error::invalid(format!(
                    "synth material name {:?} must be a single alphanumeric token",
                    m.name
                )));
            }
            if !(m.multiplier.is_finite() && m.multiplier > 0.0) {
                return Err(Error::invalid(format!(
                    "synth material {} needs a positive multiplier",
                    m.name
                )));
            }
        }
        let c = &self.cost;
        if [c.base, c.rotated_max, c.arc_angle_mean, c.ellipse_count, c.circle_radius_std]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("synth cost coefficients must be finite"));
        }
        Ok(())
    }

    pub fn lexicon(&self) -> MaterialLexicon {
        MaterialLexicon::new(self.materials.iter().map(|m| m.name.clone()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Generated drawing with its exact ground-truth quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDrawing {
    pub drawing: Drawing,
    pub quantities: QuantitySet,
    pub material: MaterialSpec,
}

/// Random drawing from a template. Entities are drawn at `size / scale`;
/// the first rotated dimension's definition points reproduce the scale.
pub fn generate_drawing(
    template: &GroupTemplate,
    materials: &[MaterialSpec],
    source_id: &str,
    rng: &mut ChaCha8Rng,
) -> SynthDrawing {
    let scale = template.scales[rng.random_range(0..template.scales.len())];
    let material = materials[rng.random_range(0..materials.len())].clone();
    let mut d = Drawing::new(source_id, template.name.clone());
    let mut qs = QuantitySet::empty(source_id, template.name.clone());
    qs.scale = scale;

    let point = |rng: &mut ChaCha8Rng| Point2::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0));
    let along = |p: Point2, len: f64, theta: f64| Point2::new(p.x + len * theta.cos(), p.y + len * theta.sin());

    for _ in 0..template.lines.sample(rng) {
        let len = template.line_length.sample(rng);
        let start = point(rng);
        let theta = rng.random_range(0.0..2.0 * PI);
        d.lines.push(LineEntity { start, end: along(start, len / scale, theta) });
        qs.line_lengths.push(len);
    }
    for _ in 0..template.circles.sample(rng) {
        let r = template.circle_radius.sample(rng);
        d.circles.push(CircleEntity { center: point(rng), radius: r / scale });
        qs.circle_radii.push(r);
    }
    for _ in 0..template.arcs.sample(rng) {
        let r = template.arc_radius.sample(rng);
        let span = template.arc_span.sample(rng);
        let start: f64 = rng.random_range(0.0..360.0);
        d.arcs.push(ArcEntity {
            center: point(rng),
            radius: r / scale,
            start_angle: start,
            end_angle: (start + span).rem_euclid(360.0),
        });
        qs.arc_lengths.push(r * span * PI / 180.0);
        qs.arc_angles.push(span);
    }
    for _ in 0..template.splines.sample(rng) {
        let n = rng.random_range(4..=7);
        d.splines.push(SplineEntity {
            degree: 3,
            control_points: (0..n).map(|_| point(rng)).collect(),
            fit_points: Vec::new(),
        });
    }
    qs.spline_count = d.splines.len();
    for _ in 0..template.ellipses.sample(rng) {
        let major = template.circle_radius.sample(rng) / scale;
        let theta = rng.random_range(0.0..2.0 * PI);
        d.ellipses.push(EllipseEntity {
            center: point(rng),
            major_axis: along(Point2::default(), major, theta),
            axis_ratio: rng.random_range(0.2..=1.0),
        });
    }
    qs.ellipse_count = d.ellipses.len();

    let tolerance = |rng: &mut ChaCha8Rng| -> Option<f64> {
        (rng.random_bool(template.tolerance_probability))
            .then(|| template.tolerances[rng.random_range(0..template.tolerances.len())])
    };
    let dim = |kind, measurement: f64, tol: Option<f64>, a: Option<Point2>, b: Option<Point2>| DimensionEntity {
        kind,
        text_override: tol.map(|t| format!("<> ±{t}")),
        measurement,
        tolerance: tol,
        def_point_a: a,
        def_point_b: b,
    };

    for _ in 0..template.rotated_dims.sample(rng) {
        let m = template.rotated_length.sample(rng);
        let a = point(rng);
        let b = Point2::new(a.x + m / scale, a.y);
        let tol = tolerance(rng);
        d.dimensions.push(dim(DimensionKind::Rotated, m, tol, Some(a), Some(b)));
        qs.rotated_measurements.push(m);
        qs.tolerances.extend(tol);
    }
    for _ in 0..template.angular_dims.sample(rng) {
        let deg = rng.random_range(10.0..=170.0);
        d.dimensions.push(dim(DimensionKind::Angular, deg, None, None, Some(point(rng))));
        qs.angular_measurements.push(deg);
    }
    for _ in 0..template.diametric_dims.sample(rng) {
        let m = 2.0 * pick_or_sample(&qs.circle_radii, &template.circle_radius, rng);
        let tol = tolerance(rng);
        d.dimensions.push(dim(DimensionKind::Diametric, m, tol, None, Some(point(rng))));
        qs.diametric_measurements.push(m);
        qs.tolerances.extend(tol);
    }
    for _ in 0..template.radial_dims.sample(rng) {
        let m = pick_or_sample(&qs.circle_radii, &template.circle_radius, rng);
        let tol = tolerance(rng);
        d.dimensions.push(dim(DimensionKind::Radial, m, tol, None, Some(point(rng))));
        qs.radial_measurements.push(m);
        qs.tolerances.extend(tol);
    }

    d.texts.push(format!("Material: {}", material.name));
    d.texts.push(format!("Part {source_id}"));
    qs.materials.push(material.name.clone());

    SynthDrawing { drawing: d, quantities: qs, material }
}

fn pick_or_sample(existing: &[f64], range: &Range, rng: &mut ChaCha8Rng) -> f64 {
    if existing.is_empty() {
        range.sample(rng)
    } else {
        existing[rng.random_range(0..existing.len())]
    }
}

fn mean_or_zero(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Population standard deviation, 0 for fewer than two values.
fn std_or_zero(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean_or_zero(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Linear cost before clamping. Empty lists contribute 0.
pub fn linear_cost(qs: &QuantitySet, c: &CostCoefficients) -> f64 {
    let rotated_max = qs
        .rotated_measurements
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0);
    c.base
        + c.rotated_max * rotated_max
        + c.arc_angle_mean * mean_or_zero(&qs.arc_angles)
        + c.ellipse_count * qs.ellipse_count as f64
        + c.circle_radius_std * std_or_zero(&qs.circle_radii)
}

/// `clamp(linear_cost, 0.5, 50) * multiplier * max(1 + noise, MIN_NOISE_FACTOR)`
/// where `noise` is the already drawn relative noise.
pub fn true_cost(qs: &QuantitySet, multiplier: f64, c: &CostCoefficients, noise: f64) -> f64 {
    linear_cost(qs, c).clamp(COST_MIN, COST_MAX) * multiplier * (1.0 + noise).max(MIN_NOISE_FACTOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub drawing: SynthDrawing,
    /// Relative noise drawn for this sample.
    pub noise: f64,
    pub cost: f64,
}

pub fn source_id(index: usize) -> String {
    format!("part_{index:05}")
}

/// Drawing `i` uses ChaCha8 stream `i` of the config seed and template
/// `i mod groups`, so each sample is reproducible on its own.
pub fn generate_sample(config: &SynthConfig, index: usize) -> SynthSample {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let template = &config.groups[index % config.groups.len()];
    let drawing = generate_drawing(template, &config.materials, &source_id(index), &mut rng);
    let z: f64 = StandardNormal.sample(&mut rng);
    let noise = config.noise_pct * z;
    let cost = true_cost(&drawing.quantities, drawing.material.multiplier, &config.cost, noise);
    SynthSample { drawing, noise, cost }
}

pub fn generate_samples(config: &SynthConfig) -> Result<Vec<SynthSample>> {
    config.validate()?;
    Ok((0..config.n_drawings).map(|i| generate_sample(config, i)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPaths {
    pub dxf_files: Vec<PathBuf>,
    pub labels: PathBuf,
    pub lexicon: PathBuf,
    pub config: PathBuf,
}

/// Writes `<source_id>.dxf` per sample plus `labels.csv`, `lexicon.txt`
/// and the config as `synth_config.json`.
pub fn generate_corpus(config: &SynthConfig, out_dir: &Path) -> Result<CorpusPaths> {
    let samples = generate_samples(config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut dxf_files = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in &samples {
        let d = &s.drawing.drawing;
        let path = out_dir.join(format!("{}.dxf", d.source_id));
        fs::write(&path, write_dxf(d)).map_err(|e| Error::io(&path, e))?;
        dxf_files.push(path);
        labels.push(Label {
            source_id: d.source_id.clone(),
            group: d.group.clone(),
            cost: s.cost,
        });
    }
    let labels_path = out_dir.join("labels.csv");
    write_labels(&labels_path, &labels)?;
    let lexicon = out_dir.join("lexicon.txt");
    let mut lex = String::new();
    for m in &config.materials {
        lex.push_str(&m.name);
        lex.push('\n');
    }
    fs::write(&lexicon, lex).map_err(|e| Error::io(&lexicon, e))?;
    let config_path = out_dir.join("synth_config.json");
    fs::write(&config_path, config.to_json()? + "\n").map_err(|e| Error::io(&config_path, e))?;
    Ok(CorpusPaths {
        dxf_files,
        labels: labels_path,
        lexicon,
        config: config_path,
    })
}
