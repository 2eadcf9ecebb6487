use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineEntity {
    pub start: Point2,
    pub end: Point2,
}

impl LineEntity {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleEntity {
    pub center: Point2,
    pub radius: f64,
}

/// Circular arc, angles in degrees measured counter-clockwise from +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcEntity {
    pub center: Point2,
    pub radius: f64,
    pub start_angle: f64,
    pub end_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineEntity {
    pub degree: u32,
    pub control_points: Vec<Point2>,
    pub fit_points: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseEntity {
    pub center: Point2,
    /// Endpoint of the major axis relative to `center`.
    pub major_axis: Point2,
    /// Minor-to-major axis ratio in `(0, 1]`.
    pub axis_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DimensionKind {
    Rotated,
    Angular,
    Diametric,
    Radial,
    Other,
}

impl DimensionKind {
    /// Decodes group code 70. Bits above the low three (block reference,
    /// ordinate-X, user-positioned text) are flags and are masked off.
    pub fn from_flags(flags: i64) -> Self {
        match flags & 7 {
            0 => DimensionKind::Rotated,
            2 => DimensionKind::Angular,
            3 => DimensionKind::Diametric,
            4 => DimensionKind::Radial,
            _ => DimensionKind::Other,
        }
    }

    /// Group code 70 value written by [`write_dxf`](super::write_dxf).
    /// `Other` is written as an aligned dimension.
    pub fn to_flags(self) -> i64 {
        match self {
            DimensionKind::Rotated => 0,
            DimensionKind::Other => 1,
            DimensionKind::Angular => 2,
            DimensionKind::Diametric => 3,
            DimensionKind::Radial => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEntity {
    pub kind: DimensionKind,
    pub text_override: Option<String>,
    /// Actual measurement (code 42): real-world length, or degrees for
    /// angular dimensions.
    pub measurement: f64,
    pub tolerance: Option<f64>,
    pub def_point_a: Option<Point2>,
    pub def_point_b: Option<Point2>,
}

/// Entities of one drawing, grouped by type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Drawing {
    pub source_id: String,
    pub group: String,
    pub lines: Vec<LineEntity>,
    pub circles: Vec<CircleEntity>,
    pub arcs: Vec<ArcEntity>,
    pub splines: Vec<SplineEntity>,
    pub ellipses: Vec<EllipseEntity>,
    pub dimensions: Vec<DimensionEntity>,
    pub texts: Vec<String>,
}

impl Drawing {
    pub fn new(source_id: impl Into<String>, group: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            group: group.into(),
            ..Default::default()
        }
    }

    pub fn entity_count(&self) -> usize {
        self.lines.len()
            + self.circles.len()
            + self.arcs.len()
            + self.splines.len()
            + self.ellipses.len()
            + self.dimensions.len()
            + self.texts.len()
    }
}

/// Angular span of an arc in degrees, in `(0, 360]`.
///
/// Arcs run counter-clockwise from start to end; identical start and end
/// angles denote a full turn.
pub fn arc_span(arc: &ArcEntity) -> f64 {
    let span = (arc.end_angle - arc.start_angle).rem_euclid(360.0);
    if span == 0.0 {
        360.0
    } else {
        span
    }
}

pub fn arc_length(arc: &ArcEntity) -> f64 {
    arc.radius * arc_span(arc) * PI / 180.0
}
