//! Random-forest regression and mean-decrease-impurity (MDI) feature importance.
//!
//! Features are built from evaluation records: every numeric parameter except the seed becomes
//! one column and every prompt token one binary column. Trees are CART regressors split on
//! variance reduction; MDI credits each split's impurity decrease to its feature.

mod analysis;
mod features;
mod forest;
mod search;
mod tree;

pub use analysis::{importance_analysis, importance_from_records, ImportanceReport, Target, ValueSpread};
pub use features::FeatureMatrix;
pub use forest::{fit_forest, fit_forest_rows, mdi_importance, Forest, MdiImportance};
pub use search::{cross_val_r2, randomized_search, randomized_search_in, SearchGrid, SearchOutcome};
pub use tree::{fit_tree, fit_tree_rows, Node, RegressionTree};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImportanceError {
    #[error("no rows to fit")]
    Empty,
    #[error("feature matrix has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("targets must be finite")]
    NonFiniteTarget,
    #[error("cross-validation needs at least two rows")]
    TooFewRows,
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("archives disagree on the search space")]
    MixedSpaces,
    #[error("{0}")]
    Other(String),
}

/// Hyperparameters of a regression forest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn at each node; `ceil(fraction * d)` of them.
    pub max_features_fraction: f64,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features_fraction: 1.0,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ImportanceError> {
        if self.n_trees == 0 {
            return Err(ImportanceError::InvalidConfig("n_trees must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(ImportanceError::InvalidConfig("min_samples_leaf must be at least 1"));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(ImportanceError::InvalidConfig("max_features_fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Number of features drawn at each node for `d` features.
    pub fn features_per_node(&self, d: usize) -> usize {
        let k = libm::ceil(self.max_features_fraction * d as f64) as usize;
        k.clamp(1, d.max(1))
    }
}

fn check_inputs(x: &FeatureMatrix, y: &[f64]) -> Result<(), ImportanceError> {
    if x.n_rows() == 0 {
        return Err(ImportanceError::Empty);
    }
    if x.n_rows() != y.len() {
        return Err(ImportanceError::LengthMismatch { rows: x.n_rows(), targets: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ImportanceError::NonFiniteTarget);
    }
    Ok(())
}

/// Coefficient of determination of `pred` against `truth`; 0 when `truth` is constant.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> f64 {
    let n = truth.len() as f64;
    if truth.is_empty() {
        return 0.0;
    }
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}
