use std::fmt::Write as _;

use super::entity::{DimensionEntity, Drawing, Point2};
use super::parse::parse_tolerance;

const MTEXT_CHUNK: usize = 250;

/// Serializes a drawing as a minimal ASCII DXF file with only an ENTITIES
/// section. Floats use the shortest representation that parses back to the
/// same value, so numeric fields survive a round trip exactly.
pub fn write_dxf(drawing: &Drawing) -> String {
    let mut w = Writer::default();
    w.tag(0, "SECTION");
    w.tag(2, "ENTITIES");

    for line in &drawing.lines {
        w.entity("LINE");
        w.point(10, line.start);
        w.point(11, line.end);
    }
    for circle in &drawing.circles {
        w.entity("CIRCLE");
        w.point(10, circle.center);
        w.num(40, circle.radius);
    }
    for arc in &drawing.arcs {
        w.entity("ARC");
        w.point(10, arc.center);
        w.num(40, arc.radius);
        w.num(50, arc.start_angle);
        w.num(51, arc.end_angle);
    }
    for spline in &drawing.splines {
        w.entity("SPLINE");
        w.tag(71, &spline.degree.to_string());
        w.tag(73, &spline.control_points.len().to_string());
        w.tag(74, &spline.fit_points.len().to_string());
        for p in &spline.control_points {
            w.point(10, *p);
        }
        for p in &spline.fit_points {
            w.point(11, *p);
        }
    }
    for ellipse in &drawing.ellipses {
        w.entity("ELLIPSE");
        w.point(10, ellipse.center);
        w.point(11, ellipse.major_axis);
        w.num(40, ellipse.axis_ratio);
    }
    for dim in &drawing.dimensions {
        write_dimension(&mut w, dim);
    }
    for text in &drawing.texts {
        let text = text.replace(['\r', '\n'], " ");
        if text.chars().count() <= MTEXT_CHUNK {
            w.entity("TEXT");
            w.point(10, Point2::default());
            w.num(40, 2.5);
            w.tag(1, &text);
        } else {
            w.entity("MTEXT");
            w.point(10, Point2::default());
            w.num(40, 2.5);
            let chars: Vec<char> = text.chars().collect();
            let mut chunks = chars.chunks(MTEXT_CHUNK).peekable();
            while let Some(chunk) = chunks.next() {
                let s: String = chunk.iter().collect();
                w.tag(if chunks.peek().is_some() { 3 } else { 1 }, &s);
            }
        }
    }

    w.tag(0, "ENDSEC");
    w.tag(0, "EOF");
    w.out
}

fn write_dimension(w: &mut Writer, dim: &DimensionEntity) {
    w.entity("DIMENSION");
    w.point(10, dim.def_point_b.unwrap_or_default());
    w.tag(70, &dim.kind.to_flags().to_string());

    // The tolerance is only carried by the text override, so make sure the
    // written text encodes it.
    let text = match (&dim.text_override, dim.tolerance) {
        (Some(t), tol) if parse_tolerance(t) == tol => Some(t.clone()),
        (_, Some(tol)) => Some(format!("<> ±{tol}")),
        (Some(t), None) => Some(t.clone()),
        (None, None) => None,
    };
    if let Some(text) = text {
        w.tag(1, &text.replace(['\r', '\n'], " "));
    }
    w.num(42, dim.measurement);
    if let Some(p) = dim.def_point_a {
        w.point(13, p);
    }
    if let Some(p) = dim.def_point_b {
        w.point(14, p);
    }
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn tag(&mut self, code: i32, value: &str) {
        let _ = write!(self.out, "{code}\n{value}\n");
    }

    fn entity(&mut self, kind: &str) {
        self.tag(0, kind);
        self.tag(8, "0");
    }

    fn num(&mut self, code: i32, v: f64) {
        let _ = write!(self.out, "{code}\n{v:?}\n");
    }

    fn point(&mut self, x_code: i32, p: Point2) {
        self.num(x_code, p.x);
        self.num(x_code + 10, p.y);
        self.num(x_code + 20, 0.0);
    }
}
