//! CAD-to-cost pipeline.
//!
//! ASCII DXF drawings are parsed into an entity model ([`dxf`]), reduced to
//! scaled geometric quantities and then to a fixed, named feature vector
//! ([`features`]) that includes distances to per-product-group reference
//! histograms ([`group_ref`]). A from-scratch gradient-boosted tree engine
//! ([`gbdt`]) regresses unit cost on those features; [`evaluate`] holds the
//! splitting, cross-validation and search machinery, and [`explain`] the
//! importance, Shapley and tree-export tools. [`synth`] generates labelled
//! drawing corpora with a known cost function, and [`pipeline`] ties the
//! stages together over files.

pub mod dxf;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod group_ref;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
