use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::entity::{
    ArcEntity, CircleEntity, DimensionEntity, DimensionKind, Drawing, EllipseEntity, LineEntity,
    Point2, SplineEntity,
};
use super::tokenize::{tokenize_dxf, DxfTag};
use crate::error::{Error, Result};

/// A rejected entity: its type, position among the ENTITIES records, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub entity_index: usize,
    pub entity_type: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ParsedDrawing {
    pub drawing: Drawing,
    pub diagnostics: Vec<Diagnostic>,
    /// Entity records of types this parser does not model, by type name.
    pub unsupported: BTreeMap<String, usize>,
    /// Records of supported types seen, accepted or not.
    pub supported_total: usize,
}

impl ParsedDrawing {
    pub fn accepted(&self) -> usize {
        self.drawing.entity_count()
    }
}

/// Reads and parses one ASCII DXF file. The source id is the file stem.
pub fn read_drawing(path: &Path, group: &str) -> Result<ParsedDrawing> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let tags = tokenize_dxf(&text)?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_drawing(&tags, group, &source_id)
}

/// Builds a [`Drawing`] from the ENTITIES section of a tokenized DXF file.
///
/// A malformed entity is rejected with a [`Diagnostic`] and parsing carries
/// on with the next record.
pub fn parse_drawing(tags: &[DxfTag], group: &str, source_id: &str) -> Result<ParsedDrawing> {
    if source_id.is_empty() {
        return Err(Error::invalid("source id must not be empty"));
    }
    let body = entities_section(tags)?;

    let mut out = ParsedDrawing {
        drawing: Drawing::new(source_id, group),
        diagnostics: Vec::new(),
        unsupported: BTreeMap::new(),
        supported_total: 0,
    };

    for (index, record) in split_records(body).into_iter().enumerate() {
        let kind = record[0].value.trim();
        let fields = &record[1..];
        let outcome = match kind {
            "LINE" => parse_line(fields).map(|e| out.drawing.lines.push(e)),
            "CIRCLE" => parse_circle(fields).map(|e| out.drawing.circles.push(e)),
            "ARC" => parse_arc(fields).map(|e| out.drawing.arcs.push(e)),
            "SPLINE" => parse_spline(fields).map(|e| out.drawing.splines.push(e)),
            "ELLIPSE" => parse_ellipse(fields).map(|e| out.drawing.ellipses.push(e)),
            "DIMENSION" => parse_dimension(fields).map(|e| out.drawing.dimensions.push(e)),
            "TEXT" => parse_text(fields).map(|e| out.drawing.texts.push(e)),
            "MTEXT" => parse_mtext(fields).map(|e| out.drawing.texts.push(e)),
            other => {
                *out.unsupported.entry(other.to_string()).or_default() += 1;
                continue;
            }
        };
        out.supported_total += 1;
        if let Err(message) = outcome {
            out.diagnostics.push(Diagnostic {
                entity_index: index,
                entity_type: kind.to_string(),
                message,
            });
        }
    }
    Ok(out)
}

fn entities_section(tags: &[DxfTag]) -> Result<&[DxfTag]> {
    let start = tags
        .windows(2)
        .position(|w| {
            w[0].code == 0
                && w[0].value.trim() == "SECTION"
                && w[1].code == 2
                && w[1].value.trim() == "ENTITIES"
        })
        .ok_or_else(|| Error::Parse {
            line: 2 * tags.len() + 1,
            message: "no ENTITIES section".into(),
        })?;
    let body = &tags[start + 2..];
    let end = body
        .iter()
        .position(|t| t.code == 0 && t.value.trim() == "ENDSEC")
        .ok_or_else(|| Error::Parse {
            line: 2 * tags.len() + 1,
            message: "ENTITIES section is not terminated by ENDSEC".into(),
        })?;
    Ok(&body[..end])
}

/// Each record starts at a code-0 tag and runs until the next one.
fn split_records(body: &[DxfTag]) -> Vec<&[DxfTag]> {
    let mut records = Vec::new();
    let mut start = None;
    for (i, tag) in body.iter().enumerate() {
        if tag.code == 0 {
            if let Some(s) = start {
                records.push(&body[s..i]);
            }
            start = Some(i);
        }
    }
    if let Some(s) = start {
        records.push(&body[s..]);
    }
    records
}

type EntityResult<T> = std::result::Result<T, String>;

fn number(tag: &DxfTag) -> EntityResult<f64> {
    tag.as_f64()
        .ok_or_else(|| format!("group code {} holds non-numeric value {:?}", tag.code, tag.value))
}

/// Last numeric value for each requested code.
struct Fields<'a> {
    tags: &'a [DxfTag],
}

impl<'a> Fields<'a> {
    fn new(tags: &'a [DxfTag]) -> Self {
        Self { tags }
    }

    fn get(&self, code: i32) -> EntityResult<Option<f64>> {
        match self.tags.iter().rev().find(|t| t.code == code) {
            Some(t) => number(t).map(Some),
            None => Ok(None),
        }
    }

    fn require(&self, code: i32) -> EntityResult<f64> {
        self.get(code)?
            .ok_or_else(|| format!("missing mandatory group code {code}"))
    }

    fn point(&self, x: i32, y: i32) -> EntityResult<Point2> {
        Ok(Point2::new(self.require(x)?, self.require(y)?))
    }

    fn optional_point(&self, x: i32, y: i32) -> EntityResult<Option<Point2>> {
        match (self.get(x)?, self.get(y)?) {
            (Some(px), Some(py)) => Ok(Some(Point2::new(px, py))),
            (None, None) => Ok(None),
            _ => Err(format!("incomplete point: codes {x}/{y} must both be present")),
        }
    }

    fn text(&self, code: i32) -> Option<&'a str> {
        self.tags
            .iter()
            .rev()
            .find(|t| t.code == code)
            .map(|t| t.value.as_str())
    }
}

fn positive(value: f64, what: &str) -> EntityResult<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(format!("{what} must be positive, got {value}"))
    }
}

fn parse_line(tags: &[DxfTag]) -> EntityResult<LineEntity> {
    let f = Fields::new(tags);
    Ok(LineEntity {
        start: f.point(10, 20)?,
        end: f.point(11, 21)?,
    })
}

fn parse_circle(tags: &[DxfTag]) -> EntityResult<CircleEntity> {
    let f = Fields::new(tags);
    Ok(CircleEntity {
        center: f.point(10, 20)?,
        radius: positive(f.require(40)?, "radius")?,
    })
}

fn parse_arc(tags: &[DxfTag]) -> EntityResult<ArcEntity> {
    let f = Fields::new(tags);
    Ok(ArcEntity {
        center: f.point(10, 20)?,
        radius: positive(f.require(40)?, "radius")?,
        start_angle: f.require(50)?,
        end_angle: f.require(51)?,
    })
}

fn parse_ellipse(tags: &[DxfTag]) -> EntityResult<EllipseEntity> {
    let f = Fields::new(tags);
    let major_axis = f.point(11, 21)?;
    if major_axis.norm() <= 0.0 {
        return Err("ellipse major axis has zero length".into());
    }
    let axis_ratio = f.require(40)?;
    if !(axis_ratio > 0.0 && axis_ratio <= 1.0) {
        return Err(format!("ellipse axis ratio {axis_ratio} outside (0, 1]"));
    }
    Ok(EllipseEntity {
        center: f.point(10, 20)?,
        major_axis,
        axis_ratio,
    })
}

/// Control points come as repeated 10/20 pairs, fit points as 11/21 pairs.
fn parse_spline(tags: &[DxfTag]) -> EntityResult<SplineEntity> {
    let f = Fields::new(tags);
    let degree = f.require(71)?;
    if degree < 1.0 || degree.fract() != 0.0 {
        return Err(format!("spline degree {degree} is not a positive integer"));
    }

    let mut control: Vec<Point2> = Vec::new();
    let mut fit: Vec<Point2> = Vec::new();
    let mut pending_control: Option<f64> = None;
    let mut pending_fit: Option<f64> = None;
    for tag in tags {
        match tag.code {
            10 => {
                if pending_control.is_some() {
                    return Err("control point without y coordinate".into());
                }
                pending_control = Some(number(tag)?);
            }
            20 => {
                let x = pending_control
                    .take()
                    .ok_or("control point y coordinate without x")?;
                control.push(Point2::new(x, number(tag)?));
            }
            11 => {
                if pending_fit.is_some() {
                    return Err("fit point without y coordinate".into());
                }
                pending_fit = Some(number(tag)?);
            }
            21 => {
                let x = pending_fit.take().ok_or("fit point y coordinate without x")?;
                fit.push(Point2::new(x, number(tag)?));
            }
            _ => {}
        }
    }
    if pending_control.is_some() || pending_fit.is_some() {
        return Err("dangling spline point coordinate".into());
    }
    if control.is_empty() && fit.is_empty() {
        return Err("spline has neither control nor fit points".into());
    }
    Ok(SplineEntity {
        degree: degree as u32,
        control_points: control,
        fit_points: fit,
    })
}

fn parse_text(tags: &[DxfTag]) -> EntityResult<String> {
    Fields::new(tags)
        .text(1)
        .map(str::to_string)
        .ok_or_else(|| "TEXT without group code 1".into())
}

/// MTEXT splits long strings into 250-character code-3 chunks followed by a
/// final code-1 chunk.
fn parse_mtext(tags: &[DxfTag]) -> EntityResult<String> {
    let mut text = String::new();
    let mut seen = false;
    for tag in tags.iter().filter(|t| t.code == 1 || t.code == 3) {
        text.push_str(&tag.value);
        seen = true;
    }
    if seen {
        Ok(text)
    } else {
        Err("MTEXT without group code 1 or 3".into())
    }
}

fn parse_dimension(tags: &[DxfTag]) -> EntityResult<DimensionEntity> {
    let f = Fields::new(tags);
    let flags = f.require(70)?;
    if flags.fract() != 0.0 || flags < 0.0 {
        return Err(format!("dimension type flags {flags} are not a non-negative integer"));
    }
    let measurement = f.require(42)?;
    let text_override = f.text(1).filter(|t| !t.is_empty()).map(str::to_string);
    let tolerance = text_override.as_deref().and_then(parse_tolerance);
    Ok(DimensionEntity {
        kind: DimensionKind::from_flags(flags as i64),
        text_override,
        measurement,
        tolerance,
        def_point_a: f.optional_point(13, 23)?,
        def_point_b: f.optional_point(14, 24)?,
    })
}

/// Extracts `x` from a `±x` (or DXF `%%p x`) tolerance in dimension text.
pub fn parse_tolerance(text: &str) -> Option<f64> {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    let re = PATTERN.get_or_init(|| {
        Regex::new(r"(?:±|%%[pP])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)").expect("valid regex")
    });
    re.captures(text)
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| v.is_finite())
}
