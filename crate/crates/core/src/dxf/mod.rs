//! ASCII DXF reading and writing plus the per-drawing geometric quantities
//! derived from the parsed entities.

mod entity;
mod lexicon;
mod parse;
mod quantities;
mod tokenize;
mod write;

pub use entity::{
    arc_length, arc_span, ArcEntity, CircleEntity, DimensionEntity, DimensionKind, Drawing,
    EllipseEntity, LineEntity, Point2, SplineEntity,
};
pub use lexicon::MaterialLexicon;
pub use parse::{parse_drawing, parse_tolerance, read_drawing, Diagnostic, ParsedDrawing};
pub use quantities::{compute_scale, extract_quantities, QuantitySet};
pub use tokenize::{tokenize_dxf, DxfTag};
pub use write::write_dxf;
