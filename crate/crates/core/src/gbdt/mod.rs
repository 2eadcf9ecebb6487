//! Gradient-boosted regression trees with squared loss.
//!
//! Splits use the second-order regularized gain
//! `½[S(G_L, H_L) + S(G_R, H_R) − S(G, H)] − gamma` with
//! `S(G, H) = T(G)² / (H + reg_lambda)` and `T` the soft threshold by
//! `reg_alpha`. Missing values (`NaN`) are routed per split to the side
//! that maximizes gain.

mod matrix;
mod model;
mod params;
mod tree;

pub use matrix::{Dataset, Matrix};
pub use model::{
    fit_cart, fit_gbdt, split_count_importance, EarlyStopping, GbdtModel, RoundLog, MODEL_FORMAT,
};
pub use params::{Growth, TrainParams};
pub use tree::{best_split, fit_tree, leaf_weight, SplitCandidate, TreeNode};
