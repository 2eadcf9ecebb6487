//! Descriptive statistics, 12-bin histograms and the named feature vector.
//!
//! Every drawing maps onto the same closed column set for a given group
//! reference: ten descriptors for each of nine quantities, raw and
//! normalized histogram bins plus reference distances for five of them,
//! entity counts, and one indicator per material in the reference
//! vocabulary. Undefined statistics are `None`, never zero.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dxf::QuantitySet;
use crate::error::{Error, Result};
use crate::group_ref::{euclidean_distance, kl_divergence, GroupReference};

pub const N_BINS: usize = 12;
pub type BinEdges = [f64; N_BINS + 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Line,
    Arc,
    ArcAngle,
    Circle,
    Rotated,
    Angular,
    Diameter,
    Radial,
    Tolerance,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::Line,
        Quantity::Arc,
        Quantity::ArcAngle,
        Quantity::Circle,
        Quantity::Rotated,
        Quantity::Angular,
        Quantity::Diameter,
        Quantity::Radial,
        Quantity::Tolerance,
    ];

    /// Quantities that also get histogram and reference-distance features.
    pub const HISTOGRAM: [Quantity; 5] = [
        Quantity::Line,
        Quantity::Arc,
        Quantity::ArcAngle,
        Quantity::Circle,
        Quantity::Rotated,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Quantity::Line => "line",
            Quantity::Arc => "arc",
            Quantity::ArcAngle => "arc_angle",
            Quantity::Circle => "circle",
            Quantity::Rotated => "rotated",
            Quantity::Angular => "angular",
            Quantity::Diameter => "diameter",
            Quantity::Radial => "radial",
            Quantity::Tolerance => "tolerance",
        }
    }

    pub fn values(self, qs: &QuantitySet) -> &[f64] {
        match self {
            Quantity::Line => &qs.line_lengths,
            Quantity::Arc => &qs.arc_lengths,
            Quantity::ArcAngle => &qs.arc_angles,
            Quantity::Circle => &qs.circle_radii,
            Quantity::Rotated => &qs.rotated_measurements,
            Quantity::Angular => &qs.angular_measurements,
            Quantity::Diameter => &qs.diametric_measurements,
            Quantity::Radial => &qs.radial_measurements,
            Quantity::Tolerance => &qs.tolerances,
        }
    }

    pub fn has_histogram(self) -> bool {
        Self::HISTOGRAM.contains(&self)
    }
}

pub const DESCRIPTOR_NAMES: [&str; 10] = [
    "count", "min", "max", "range", "mean", "median", "mode", "std", "skewness", "kurtosis",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescriptorSet {
    pub count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub range: Option<f64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub mode: Option<f64>,
    pub std: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

impl DescriptorSet {
    /// Values in [`DESCRIPTOR_NAMES`] order.
    pub fn as_array(&self) -> [Option<f64>; 10] {
        [
            Some(self.count as f64),
            self.min,
            self.max,
            self.range,
            self.mean,
            self.median,
            self.mode,
            self.std,
            self.skewness,
            self.kurtosis,
        ]
    }
}

const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Summary statistics of a sample.
///
/// Moments are population moments (divide by n). Skewness is `m3 / m2^1.5`
/// and kurtosis is excess kurtosis `m4 / m2^2 - 3`; both are 0 for fewer
/// than three values or a variance below 1e-12. The mode is the centre of
/// the most populated of 12 equal-width bins over `[min, max]`, lowest bin
/// winning ties.
pub fn describe(values: &[f64]) -> Result<DescriptorSet> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad} in sample")));
    }
    let n = values.len();
    if n == 0 {
        return Ok(DescriptorSet::default());
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[n - 1];
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;

    let (skewness, kurtosis) = if n < 3 || m2 < DEGENERATE_VARIANCE {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    Ok(DescriptorSet {
        count: n,
        min: Some(min),
        max: Some(max),
        range: Some(max - min),
        mean: Some(mean),
        median: Some(median),
        mode: Some(modal_bin_center(values, min, max)),
        std: Some(m2.sqrt()),
        skewness: Some(skewness),
        kurtosis: Some(kurtosis),
    })
}

fn modal_bin_center(values: &[f64], min: f64, max: f64) -> f64 {
    if max <= min {
        return min;
    }
    let edges = equal_width_edges(min, max);
    let hist = build_histogram(values, &edges);
    // `max_by_key` keeps the last maximum; scan manually for the first.
    let mut best = 0;
    for (i, &c) in hist.counts.iter().enumerate() {
        if c > hist.counts[best] {
            best = i;
        }
    }
    0.5 * (edges[best] + edges[best + 1])
}

/// Twelve equal-width bins over `[min, max]`. A degenerate range collapses
/// to a unit-width band centred on the value.
pub fn equal_width_edges(min: f64, max: f64) -> BinEdges {
    let mut edges = [0.0; N_BINS + 1];
    if max > min {
        let width = (max - min) / N_BINS as f64;
        for (i, e) in edges.iter_mut().enumerate() {
            *e = min + width * i as f64;
        }
        edges[N_BINS] = max;
        if edges.windows(2).all(|w| w[0] < w[1]) {
            return edges;
        }
    }
    let lo = min - 0.5;
    for (i, e) in edges.iter_mut().enumerate() {
        *e = lo + i as f64 / N_BINS as f64;
    }
    edges
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Histogram12 {
    pub edges: BinEdges,
    pub counts: [u64; N_BINS],
    pub norm: [f64; N_BINS],
}

impl Histogram12 {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin `i` holds `edges[i] <= v < edges[i + 1]`; values outside the edges
/// clamp into the first or last bin.
pub fn build_histogram(values: &[f64], edges: &BinEdges) -> Histogram12 {
    let mut counts = [0u64; N_BINS];
    let interior = &edges[1..N_BINS];
    for &v in values {
        counts[interior.partition_point(|&e| e <= v)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let mut norm = [0.0; N_BINS];
    if total > 0 {
        for (p, &c) in norm.iter_mut().zip(&counts) {
            *p = c as f64 / total as f64;
        }
    }
    Histogram12 {
        edges: *edges,
        counts,
        norm,
    }
}

/// `mat_<NAME>` indicator per vocabulary entry (1 when matched,
/// case-insensitively).
pub fn material_onehot(materials: &[String], vocabulary: &[String]) -> IndexMap<String, f64> {
    vocabulary
        .iter()
        .map(|name| {
            let hit = materials.iter().any(|m| m.eq_ignore_ascii_case(name));
            (material_feature(name), if hit { 1.0 } else { 0.0 })
        })
        .collect()
}

pub fn material_feature(name: &str) -> String {
    format!("mat_{name}")
}

/// Ordered feature names for a material vocabulary.
pub fn feature_schema(vocabulary: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(230 + vocabulary.len());
    for q in Quantity::ALL {
        for d in DESCRIPTOR_NAMES {
            names.push(format!("{}_{d}", q.prefix()));
        }
    }
    for q in Quantity::HISTOGRAM {
        for i in 1..=N_BINS {
            names.push(format!("{}_bin{i}", q.prefix()));
        }
        for i in 1..=N_BINS {
            names.push(format!("norm_{}_bin{i}", q.prefix()));
        }
    }
    for q in Quantity::HISTOGRAM {
        names.push(format!("{}_euc_dist", q.prefix()));
        names.push(format!("{}_kl_div", q.prefix()));
    }
    names.push("ellipse_count".into());
    names.push("spline_count".into());
    names.extend(vocabulary.iter().map(|m| material_feature(m)));
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub source_id: String,
    pub group: String,
    pub values: IndexMap<String, Option<f64>>,
    pub cost: Option<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied().flatten()
    }
}

/// Turns a drawing's quantities into its feature vector.
///
/// With a reference, histogram bins use the reference edges, the Euclidean
/// and KL distances to the reference mean bins are filled in, and material
/// indicators follow the reference vocabulary. Without one, bins span the
/// drawing's own min–max, distances are missing and no material columns are
/// emitted.
pub fn featurize(qs: &QuantitySet, reference: Option<&GroupReference>) -> Result<FeatureVector> {
    if let Some(r) = reference {
        if r.group != qs.group {
            return Err(Error::invalid(format!(
                "drawing {} belongs to group {:?} but reference is for {:?}",
                qs.source_id, qs.group, r.group
            )));
        }
    }
    let vocabulary: &[String] = reference.map_or(&[], |r| &r.vocabulary);
    let mut values: IndexMap<String, Option<f64>> = IndexMap::with_capacity(230 + vocabulary.len());

    for q in Quantity::ALL {
        let desc = describe(q.values(qs))?;
        for (name, v) in DESCRIPTOR_NAMES.iter().zip(desc.as_array()) {
            values.insert(format!("{}_{name}", q.prefix()), v);
        }
    }

    let mut distances = Vec::with_capacity(2 * Quantity::HISTOGRAM.len());
    for q in Quantity::HISTOGRAM {
        let data = q.values(qs);
        let qref = reference.map(|r| r.quantity(q));
        let edges = match qref {
            Some(qr) => qr.edges,
            None => {
                let (lo, hi) = min_max(data).unwrap_or((0.0, 0.0));
                equal_width_edges(lo, hi)
            }
        };
        let hist = build_histogram(data, &edges);
        for (i, c) in hist.counts.iter().enumerate() {
            values.insert(format!("{}_bin{}", q.prefix(), i + 1), Some(*c as f64));
        }
        for (i, p) in hist.norm.iter().enumerate() {
            values.insert(format!("norm_{}_bin{}", q.prefix(), i + 1), Some(*p));
        }

        let (euc, kl) = match qref {
            Some(qr) if !data.is_empty() && qr.n_drawings > 0 => {
                let eps = reference.map_or(crate::group_ref::KL_EPSILON, |r| r.epsilon);
                (
                    Some(euclidean_distance(&hist.norm, &qr.mean_bins)?),
                    Some(kl_divergence(&hist.norm, &qr.mean_bins, eps)?),
                )
            }
            _ => (None, None),
        };
        distances.push((format!("{}_euc_dist", q.prefix()), euc));
        distances.push((format!("{}_kl_div", q.prefix()), kl));
    }
    values.extend(distances);

    values.insert("ellipse_count".into(), Some(qs.ellipse_count as f64));
    values.insert("spline_count".into(), Some(qs.spline_count as f64));
    for (name, v) in material_onehot(&qs.materials, vocabulary) {
        values.insert(name, Some(v));
    }

    Ok(FeatureVector {
        source_id: qs.source_id.clone(),
        group: qs.group.clone(),
        values,
        cost: None,
    })
}

fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let first = *values.first()?;
    Some(
        values
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_empty_and_singleton() {
        let d = describe(&[]).unwrap();
        assert_eq!(d.count, 0);
        assert!(d.as_array()[1..].iter().all(Option::is_none));

        let d = describe(&[5.0]).unwrap();
        assert_eq!(d.count, 1);
        for v in [d.min, d.max, d.mean, d.median, d.mode] {
            assert_eq!(v, Some(5.0));
        }
        assert_eq!(d.range, Some(0.0));
        assert_eq!(d.std, Some(0.0));
        assert_eq!(d.skewness, Some(0.0));
        assert_eq!(d.kurtosis, Some(0.0));
    }

    #[test]
    fn describe_rejects_non_finite() {
        assert!(describe(&[1.0, f64::NAN]).is_err());
        assert!(describe(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn describe_small_sample() {
        let d = describe(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(d.median, Some(2.5));
        assert_eq!(d.mean, Some(4.0));
        assert_eq!(d.range, Some(9.0));
        // One value per occupied 0.75-wide bin: the tie goes to the first.
        assert_eq!(d.mode, Some(1.375));
        assert!((d.std.unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        let d = describe(&[1.0, 1.2, 1.4, 10.0]).unwrap();
        assert_eq!(d.mode, Some(1.375));
    }

    #[test]
    fn mode_ties_pick_lowest_bin() {
        let d = describe(&[0.0, 12.0]).unwrap();
        assert_eq!(d.mode, Some(0.5));
    }

    #[test]
    fn histogram_unit_bins() {
        let edges: BinEdges = std::array::from_fn(|i| i as f64);
        let values: Vec<f64> = (0..12).map(|i| i as f64 + 0.5).collect();
        let h = build_histogram(&values, &edges);
        assert_eq!(h.counts, [1; 12]);
        assert!(h.norm.iter().all(|&p| p == 1.0 / 12.0));
    }

    #[test]
    fn histogram_clamps_out_of_range() {
        let edges: BinEdges = std::array::from_fn(|i| i as f64);
        let h = build_histogram(&[-5.0, 12.0, 99.0, 11.999], &edges);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[11], 3);
        let empty = build_histogram(&[], &edges);
        assert_eq!(empty.norm, [0.0; 12]);
    }

    #[test]
    fn degenerate_edges_are_a_unit_band() {
        let e = equal_width_edges(4.0, 4.0);
        assert_eq!(e[0], 3.5);
        assert_eq!(e[12], 4.5);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn onehot_examples() {
        let vocab = vec!["TPU".to_string(), "C45".to_string()];
        let m = material_onehot(&["TPU".into()], &vocab);
        assert_eq!(m["mat_TPU"], 1.0);
        assert_eq!(m["mat_C45"], 0.0);
        assert!(material_onehot(&[], &vocab).values().all(|&v| v == 0.0));
        let m = material_onehot(&["c45".into(), "Steel".into()], &vocab);
        assert_eq!(m["mat_C45"], 1.0);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn schema_width() {
        assert_eq!(feature_schema(&[]).len(), 5 * (10 + 24 + 2) + 4 * 10 + 2);
        let names = feature_schema(&["TPU".into()]);
        assert_eq!(names.last().unwrap(), "mat_TPU");
        assert!(names.contains(&"norm_line_bin8".to_string()));
        assert!(names.contains(&"arc_angle_bin12".to_string()));
        assert!(names.contains(&"diameter_max".to_string()));
        assert!(names.contains(&"tolerance_std".to_string()));
    }

    #[test]
    fn featurize_empty_drawing() {
        let fv = featurize(&QuantitySet::empty("e", "g"), None).unwrap();
        assert_eq!(fv.values.keys().cloned().collect::<Vec<_>>(), feature_schema(&[]));
        for q in Quantity::ALL {
            assert_eq!(fv.get(&format!("{}_count", q.prefix())), Some(0.0));
            assert_eq!(fv.values[&format!("{}_mean", q.prefix())], None);
        }
        assert_eq!(fv.values["line_euc_dist"], None);
        assert_eq!(fv.get("norm_line_bin1"), Some(0.0));
    }

    #[test]
    fn featurize_single_line() {
        let mut qs = QuantitySet::empty("l", "g");
        qs.line_lengths = vec![5.0];
        let fv = featurize(&qs, None).unwrap();
        assert_eq!(fv.get("line_count"), Some(1.0));
        for name in ["line_min", "line_max", "line_mean"] {
            assert_eq!(fv.get(name), Some(5.0));
        }
        assert_eq!(fv.get("line_range"), Some(0.0));
    }
}
