//! Per-product-group reference histograms and the distance features
//! measured against them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dxf::{MaterialLexicon, QuantitySet};
use crate::error::{Error, Result};
use crate::features::{build_histogram, equal_width_edges, BinEdges, Quantity, N_BINS};

/// Smoothing constant of the KL divergence.
pub const KL_EPSILON: f64 = 1e-10;

pub const GROUP_REF_FORMAT: &str = "cadcost-group-reference/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityReference {
    pub edges: BinEdges,
    /// Mean of the per-drawing normalized histograms.
    pub mean_bins: [f64; N_BINS],
    /// Training drawings with at least one value for this quantity.
    pub n_drawings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReference {
    pub format: String,
    pub group: String,
    pub epsilon: f64,
    pub quantities: BTreeMap<Quantity, QuantityReference>,
    pub vocabulary: Vec<String>,
    pub n_train: usize,
}

impl GroupReference {
    pub fn quantity(&self, q: Quantity) -> &QuantityReference {
        self.quantities
            .get(&q)
            .unwrap_or_else(|| panic!("group reference lacks histogram quantity {q:?}"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: Self = serde_json::from_str(&text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != GROUP_REF_FORMAT {
            return Err(Error::schema(format!(
                "unknown group reference format {:?}",
                self.format
            )));
        }
        for q in Quantity::HISTOGRAM {
            let qr = self
                .quantities
                .get(&q)
                .ok_or_else(|| Error::schema(format!("missing histogram quantity {q:?}")))?;
            if !qr.edges.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::schema(format!("bin edges of {q:?} not ascending")));
            }
        }
        Ok(())
    }
}

/// Fits the reference of one product group from its training drawings.
///
/// Edges are 12 equal-width bins over the pooled training range of each
/// quantity. Mean bins average the normalized histograms of the drawings
/// that have data for that quantity; the vocabulary keeps the lexicon
/// entries seen in at least one training drawing, in lexicon order.
pub fn fit_group_reference(
    training: &[&QuantitySet],
    lexicon: &MaterialLexicon,
) -> Result<GroupReference> {
    let first = training
        .first()
        .ok_or_else(|| Error::invalid("cannot fit a group reference on zero drawings"))?;
    let group = first.group.clone();
    if let Some(other) = training.iter().find(|qs| qs.group != group) {
        return Err(Error::invalid(format!(
            "mixed groups in reference fit: {:?} and {:?}",
            group, other.group
        )));
    }

    let mut quantities = BTreeMap::new();
    for q in Quantity::HISTOGRAM {
        let (lo, hi) = training
            .iter()
            .flat_map(|qs| q.values(qs))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let edges = if lo.is_finite() {
            equal_width_edges(lo, hi)
        } else {
            equal_width_edges(0.0, 0.0)
        };

        let mut sum = [0.0; N_BINS];
        let mut n_drawings = 0;
        for qs in training {
            let values = q.values(qs);
            if values.is_empty() {
                continue;
            }
            let h = build_histogram(values, &edges);
            for (s, p) in sum.iter_mut().zip(h.norm) {
                *s += p;
            }
            n_drawings += 1;
        }
        let mean_bins = if n_drawings > 0 {
            sum.map(|s| s / n_drawings as f64)
        } else {
            [0.0; N_BINS]
        };
        quantities.insert(
            q,
            QuantityReference {
                edges,
                mean_bins,
                n_drawings,
            },
        );
    }

    let vocabulary = lexicon
        .entries()
        .iter()
        .filter(|entry| {
            training
                .iter()
                .any(|qs| qs.materials.iter().any(|m| m.eq_ignore_ascii_case(entry)))
        })
        .cloned()
        .collect();

    Ok(GroupReference {
        format: GROUP_REF_FORMAT.into(),
        group,
        epsilon: KL_EPSILON,
        quantities,
        vocabulary,
        n_train: training.len(),
    })
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "histogram length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `sqrt(sum_i (dwg_i - mean_i)^2)`.
pub fn euclidean_distance(bins_dwg: &[f64], bins_mean: &[f64]) -> Result<f64> {
    check_lengths(bins_dwg, bins_mean)?;
    Ok(bins_dwg
        .iter()
        .zip(bins_mean)
        .map(|(d, m)| (d - m) * (d - m))
        .sum::<f64>()
        .sqrt())
}

/// `sum_i mean_i * ln((mean_i + eps) / (dwg_i + eps))`.
///
/// The group mean is the weighting distribution: this measures the mean
/// histogram relative to the drawing's.
pub fn kl_divergence(bins_dwg: &[f64], bins_mean: &[f64], epsilon: f64) -> Result<f64> {
    check_lengths(bins_dwg, bins_mean)?;
    if let Some(v) = bins_dwg
        .iter()
        .chain(bins_mean)
        .find(|v| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::invalid(format!(
            "histogram entries must be finite and non-negative, got {v}"
        )));
    }
    Ok(bins_dwg
        .iter()
        .zip(bins_mean)
        .map(|(d, m)| m * ((m + epsilon) / (d + epsilon)).ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(i: usize) -> [f64; 12] {
        let mut v = [0.0; 12];
        v[i] = 1.0;
        v
    }

    #[test]
    fn euclidean_examples() {
        let p = [1.0 / 12.0; 12];
        assert_eq!(euclidean_distance(&p, &p).unwrap(), 0.0);
        assert!((euclidean_distance(&unit(0), &unit(1)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(euclidean_distance(&[0.0; 12], &[0.0; 11]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = [0.5, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(kl_divergence(&p, &p, KL_EPSILON).unwrap(), 0.0);
        // mean = e1, drawing = e2
        let v = kl_divergence(&unit(1), &unit(0), KL_EPSILON).unwrap();
        let expected = ((1.0 + 1e-10) / 1e-10f64).ln();
        assert_eq!(v, expected);
        assert!((v - 23.0259).abs() < 1e-4);
        assert!(kl_divergence(&[-0.1; 12], &p, KL_EPSILON).is_err());
    }

    fn qs(id: &str, lines: &[f64]) -> QuantitySet {
        let mut q = QuantitySet::empty(id, "g");
        q.line_lengths = lines.to_vec();
        q
    }

    #[test]
    fn single_drawing_concentrated_bin() {
        // Pool range [0, 12] so the 2.x values all fall into bin 3.
        let a = qs("a", &[0.0, 12.0, 2.2, 2.4, 2.6, 2.8, 2.5, 2.1]);
        let r = fit_group_reference(&[&a], &MaterialLexicon::default()).unwrap();
        let line = r.quantity(Quantity::Line);
        assert_eq!(line.n_drawings, 1);
        let b = qs("b", &[2.5]);
        let r2 = fit_group_reference(&[&b], &MaterialLexicon::default()).unwrap();
        let line2 = r2.quantity(Quantity::Line);
        assert_eq!(line2.edges[0], 2.0);
        assert_eq!(line2.mean_bins.iter().sum::<f64>(), 1.0);
        assert_eq!(line.mean_bins[2], 6.0 / 8.0);
    }

    #[test]
    fn two_drawings_average() {
        let a = qs("a", &[0.0, 0.0, 0.0, 12.0]);
        let b = qs("b", &[12.0, 11.5]);
        let r = fit_group_reference(&[&a, &b], &MaterialLexicon::default()).unwrap();
        let mb = r.quantity(Quantity::Line).mean_bins;
        assert_eq!(mb[0], 0.75 / 2.0);
        assert_eq!(mb[11], (0.25 + 1.0) / 2.0);
        // Arcs: no data anywhere.
        let arc = r.quantity(Quantity::Arc);
        assert_eq!(arc.n_drawings, 0);
        assert_eq!(arc.mean_bins, [0.0; 12]);
    }

    #[test]
    fn vocabulary_from_observed_materials() {
        let mut a = qs("a", &[1.0]);
        a.materials = vec!["C45".into()];
        let lex = MaterialLexicon::new(["TPU", "C45", "PA6"]);
        let r = fit_group_reference(&[&a], &lex).unwrap();
        assert_eq!(r.vocabulary, vec!["C45"]);
    }

    #[test]
    fn empty_training_is_error() {
        assert!(fit_group_reference(&[], &MaterialLexicon::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = qs("a", &[1.0, 2.0, 7.5]);
        let r = fit_group_reference(&[&a], &MaterialLexicon::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.json");
        r.save(&path).unwrap();
        assert_eq!(GroupReference::load(&path).unwrap(), r);
    }
}
