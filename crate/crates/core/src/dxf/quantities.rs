use serde::{Deserialize, Serialize};

use super::entity::{arc_length, arc_span, DimensionKind, Drawing};
use super::lexicon::MaterialLexicon;

/// Scaled measurement lists of one drawing, the input to featurization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySet {
    pub source_id: String,
    pub group: String,
    pub line_lengths: Vec<f64>,
    pub arc_lengths: Vec<f64>,
    /// Angular span per arc, degrees.
    pub arc_angles: Vec<f64>,
    pub circle_radii: Vec<f64>,
    pub rotated_measurements: Vec<f64>,
    pub angular_measurements: Vec<f64>,
    pub diametric_measurements: Vec<f64>,
    pub radial_measurements: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub ellipse_count: usize,
    pub spline_count: usize,
    pub materials: Vec<String>,
    pub scale: f64,
}

impl QuantitySet {
    pub fn empty(source_id: impl Into<String>, group: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            group: group.into(),
            line_lengths: Vec::new(),
            arc_lengths: Vec::new(),
            arc_angles: Vec::new(),
            circle_radii: Vec::new(),
            rotated_measurements: Vec::new(),
            angular_measurements: Vec::new(),
            diametric_measurements: Vec::new(),
            radial_measurements: Vec::new(),
            tolerances: Vec::new(),
            ellipse_count: 0,
            spline_count: 0,
            materials: Vec::new(),
            scale: 1.0,
        }
    }
}

const MIN_DEF_DISTANCE: f64 = 1e-9;

/// Drawing-unit to real-world scale factor.
///
/// Each rotated dimension with two distinct definition points yields the
/// ratio of its stored measurement to the drawn distance; the result is the
/// median ratio, or 1.0 when no dimension qualifies.
pub fn compute_scale(drawing: &Drawing) -> f64 {
    let mut ratios: Vec<f64> = drawing
        .dimensions
        .iter()
        .filter(|d| d.kind == DimensionKind::Rotated)
        .filter_map(|d| {
            let dist = d.def_point_a?.distance(d.def_point_b?);
            let ratio = d.measurement / dist;
            (dist > MIN_DEF_DISTANCE && ratio.is_finite() && ratio > 0.0).then_some(ratio)
        })
        .collect();
    if ratios.is_empty() {
        return 1.0;
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    }
}

/// Collects the scaled measurement lists of a drawing.
///
/// Lengths and radii are multiplied by [`compute_scale`]; arc angles and
/// dimension measurements are used as stored.
pub fn extract_quantities(drawing: &Drawing, lexicon: &MaterialLexicon) -> QuantitySet {
    let scale = compute_scale(drawing);
    let mut qs = QuantitySet::empty(drawing.source_id.clone(), drawing.group.clone());
    qs.scale = scale;
    qs.line_lengths = drawing.lines.iter().map(|l| scale * l.length()).collect();
    qs.arc_lengths = drawing.arcs.iter().map(|a| scale * arc_length(a)).collect();
    qs.arc_angles = drawing.arcs.iter().map(arc_span).collect();
    qs.circle_radii = drawing.circles.iter().map(|c| scale * c.radius).collect();
    for dim in &drawing.dimensions {
        let target = match dim.kind {
            DimensionKind::Rotated => Some(&mut qs.rotated_measurements),
            DimensionKind::Angular => Some(&mut qs.angular_measurements),
            DimensionKind::Diametric => Some(&mut qs.diametric_measurements),
            DimensionKind::Radial => Some(&mut qs.radial_measurements),
            DimensionKind::Other => None,
        };
        if let Some(list) = target {
            list.push(dim.measurement);
        }
        if let Some(tol) = dim.tolerance {
            qs.tolerances.push(tol);
        }
    }
    qs.ellipse_count = drawing.ellipses.len();
    qs.spline_count = drawing.splines.len();
    qs.materials = lexicon.find_in(&drawing.texts);
    qs
}
