//! Metrics, dataset partitioning, cross-validation and hyperparameter search.

mod metrics;
mod search;
mod split;

pub use metrics::{mae, mape, mse, Metric, MAPE_GUARD};
pub use search::{
    best_cell, cross_validate, grid_search, random_search, CvResult, FoldScore, GridCell,
    GridResult, ParamRange, SearchResult, SearchSpace, Trial,
};
pub use split::{kfold, split_dataset, Partition, SplitSpec};
