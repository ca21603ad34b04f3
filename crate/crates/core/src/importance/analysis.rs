use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::forest::{fit_forest, mdi_importance};
use super::search::randomized_search;
use super::{FeatureMatrix, ForestConfig, ImportanceError};
use crate::evaluation::EvaluationRecord;
use crate::nsga2::RunArchive;
use crate::search_space::SearchSpace;
use crate::seed::{derive_seed, rng_from_seed};

/// Objective regressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Target {
    Time,
    Quality,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Time => "time",
            Target::Quality => "quality",
        }
    }

    fn value(self, r: &EvaluationRecord) -> f64 {
        match self {
            Target::Time => r.time_ms,
            Target::Quality => r.quality,
        }
    }
}

/// Mean, sample standard deviation and range of one value across repeats.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValueSpread {
    pub mean: f64,
    /// Zero for a single repeat.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ValueSpread {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, sd, min, max }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ImportanceReport {
    pub target: Target,
    pub n_rows: usize,
    pub features: Vec<String>,
    /// Distinct group names in column order; prompt tokens are grouped under their parameter.
    pub groups: Vec<String>,
    /// Normalized MDI per repeat, one entry per feature.
    pub per_repeat: Vec<Vec<f64>>,
    /// Per repeat, the sum of each group's feature importances.
    pub per_repeat_groups: Vec<Vec<f64>>,
    pub feature_summary: Vec<ValueSpread>,
    pub group_summary: Vec<ValueSpread>,
    /// Forest configuration chosen by the search in each repeat.
    pub configs: Vec<ForestConfig>,
    pub cv_r2: Vec<f64>,
    /// Repeats whose forest made no split and fell back to uniform importances.
    pub uniform_fallback: Vec<bool>,
    pub warnings: Vec<String>,
}

impl ImportanceReport {
    pub fn repeats(&self) -> usize {
        self.per_repeat.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == name)
    }

    /// Feature indices of one repeat, most important first; ties keep column order.
    pub fn ranking(&self, repeat: usize) -> Vec<usize> {
        rank_desc(&self.per_repeat[repeat])
    }

    /// Feature indices by mean importance, most important first.
    pub fn mean_ranking(&self) -> Vec<usize> {
        let means: Vec<f64> = self.feature_summary.iter().map(|s| s.mean).collect();
        rank_desc(&means)
    }

    /// Zero-based rank of `name` in `repeat`.
    pub fn rank_of(&self, repeat: usize, name: &str) -> Option<usize> {
        let i = self.feature_index(name)?;
        self.ranking(repeat).iter().position(|&j| j == i)
    }
}

fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Runs [`importance_from_records`] over all records of `archives`, which must share one
/// search space.
pub fn importance_analysis(
    archives: &[RunArchive],
    target: Target,
    repeats: usize,
    search_budget: usize,
    seed: u64,
) -> Result<ImportanceReport, ImportanceError> {
    let first = archives.first().ok_or(ImportanceError::Empty)?;
    if archives.iter().any(|a| a.space != first.space) {
        return Err(ImportanceError::MixedSpaces);
    }
    importance_from_records(
        &first.space,
        archives.iter().flat_map(|a| a.records.iter()),
        target,
        repeats,
        search_budget,
        seed,
    )
}

/// Repeated randomized search, forest fit and MDI on the records' feature matrix.
///
/// Rows are first put in canonical order: sorted lexicographically by feature values, then by
/// target, so the result does not depend on record order. Repeat `r` draws from a generator
/// seeded with `derive_seed(seed, r)`, so the first `k` repeats of a longer analysis equal a
/// `k`-repeat analysis with the same seed.
pub fn importance_from_records<'a>(
    space: &SearchSpace,
    records: impl IntoIterator<Item = &'a EvaluationRecord>,
    target: Target,
    repeats: usize,
    search_budget: usize,
    seed: u64,
) -> Result<ImportanceReport, ImportanceError> {
    if repeats == 0 {
        return Err(ImportanceError::InvalidConfig("repeats must be at least 1"));
    }
    let records: Vec<&EvaluationRecord> = records.into_iter().collect();
    if records.is_empty() {
        return Err(ImportanceError::Empty);
    }
    let raw = FeatureMatrix::from_records(space, records.iter().copied())?;
    let raw_y: Vec<f64> = records.iter().map(|r| target.value(r)).collect();

    let mut order: Vec<usize> = (0..raw.n_rows()).collect();
    order.sort_by(|&a, &b| {
        raw.row(a)
            .iter()
            .zip(raw.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(raw_y[a].total_cmp(&raw_y[b]))
    });
    let x = raw.select_rows(&order);
    let y: Vec<f64> = order.iter().map(|&i| raw_y[i]).collect();

    let groups = x.group_names();
    let group_of: Vec<usize> =
        x.groups().iter().map(|g| groups.iter().position(|h| h == g).expect("group listed")).collect();

    let mut per_repeat = Vec::with_capacity(repeats);
    let mut per_repeat_groups = Vec::with_capacity(repeats);
    let mut configs = Vec::with_capacity(repeats);
    let mut cv_r2 = Vec::with_capacity(repeats);
    let mut uniform_fallback = Vec::with_capacity(repeats);
    let mut warnings = Vec::new();
    for r in 0..repeats {
        let mut rng = rng_from_seed(derive_seed(seed, r as u64));
        let outcome = randomized_search(&x, &y, search_budget, &mut rng)?;
        if let Some(w) = outcome.warning {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        let forest = fit_forest(&x, &y, &outcome.config)?;
        let mdi = mdi_importance(&forest);
        if mdi.uniform_fallback {
            warnings.push(alloc::format!("repeat {r}: forest made no split; importances are uniform"));
        }
        let mut grouped = alloc::vec![0.0; groups.len()];
        for (v, &g) in mdi.values.iter().zip(&group_of) {
            grouped[g] += v;
        }
        per_repeat.push(mdi.values);
        per_repeat_groups.push(grouped);
        configs.push(outcome.config);
        cv_r2.push(outcome.cv_r2);
        uniform_fallback.push(mdi.uniform_fallback);
    }

    let column = |rows: &[Vec<f64>], j: usize| rows.iter().map(|v| v[j]).collect::<Vec<f64>>();
    let feature_summary = (0..x.n_cols()).map(|j| ValueSpread::of(&column(&per_repeat, j))).collect();
    let group_summary = (0..groups.len()).map(|j| ValueSpread::of(&column(&per_repeat_groups, j))).collect();

    Ok(ImportanceReport {
        target,
        n_rows: x.n_rows(),
        features: x.names().to_vec(),
        groups,
        per_repeat,
        per_repeat_groups,
        feature_summary,
        group_summary,
        configs,
        cv_r2,
        uniform_fallback,
        warnings,
    })
}
