use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use super::forest::fit_forest_rows;
use super::{check_inputs, r_squared, FeatureMatrix, ForestConfig, ImportanceError};
use crate::seed::rng_from_seed;

pub const DEFAULT_FOLDS: usize = 5;

/// Hyperparameter grid sampled by [`randomized_search`]. Each field is sampled uniformly and
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub n_trees: Vec<usize>,
    /// `None` means unlimited depth.
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features_fraction: Vec<f64>,
}

impl Default for SearchGrid {
    /// `n_trees` in {50, 100, ..., 300}, `max_depth` in {3, ..., 20, unlimited},
    /// `min_samples_leaf` in {1, ..., 10}, `max_features_fraction` in {0.3, 0.4, ..., 1.0}.
    fn default() -> Self {
        Self {
            n_trees: (1..=6).map(|k| 50 * k).collect(),
            max_depth: (3..=20).map(Some).chain([None]).collect(),
            min_samples_leaf: (1..=10).collect(),
            max_features_fraction: (3..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

impl SearchGrid {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, forest_seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: *self.n_trees.choose(rng).expect("non-empty grid"),
            max_depth: *self.max_depth.choose(rng).expect("non-empty grid"),
            min_samples_leaf: *self.min_samples_leaf.choose(rng).expect("non-empty grid"),
            max_features_fraction: *self.max_features_fraction.choose(rng).expect("non-empty grid"),
            bootstrap: true,
            rng_seed: forest_seed,
        }
    }

    fn is_empty(&self) -> bool {
        self.n_trees.is_empty()
            || self.max_depth.is_empty()
            || self.min_samples_leaf.is_empty()
            || self.max_features_fraction.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub config: ForestConfig,
    pub cv_r2: f64,
    pub folds: usize,
    /// Every sampled config with its CV score, in sampling order.
    pub evaluated: Vec<(ForestConfig, f64)>,
    pub warning: Option<String>,
}

/// Pooled k-fold cross-validated R^2 of `cfg` on `(x, y)`.
///
/// Rows are shuffled with a generator seeded by `fold_seed` and cut into `folds` contiguous
/// blocks; block `k` covers positions `k*n/folds .. (k+1)*n/folds`. Out-of-fold predictions from
/// all blocks are pooled and scored together. Returns the score and the fold count used, which
/// is reduced to `n` when there are fewer rows than folds.
pub fn cross_val_r2(
    x: &FeatureMatrix,
    y: &[f64],
    cfg: &ForestConfig,
    folds: usize,
    fold_seed: u64,
) -> Result<(f64, usize), ImportanceError> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let n = x.n_rows();
    if n < 2 {
        return Err(ImportanceError::TooFewRows);
    }
    let k = folds.clamp(2, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(fold_seed));

    let mut pred = vec![0.0; n];
    for fold in 0..k {
        let (lo, hi) = (fold * n / k, (fold + 1) * n / k);
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let forest = fit_forest_rows(x, y, &train, cfg);
        for &r in &order[lo..hi] {
            pred[r] = forest.predict(x.row(r));
        }
    }
    Ok((r_squared(y, &pred), k))
}

/// [`randomized_search_in`] over the default grid.
pub fn randomized_search<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    y: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<SearchOutcome, ImportanceError> {
    randomized_search_in(&SearchGrid::default(), x, y, budget, rng)
}

/// Samples `budget` configs from `grid` and keeps the one with the best 5-fold CV R^2.
///
/// One fold seed and one forest seed are drawn from `rng` first and shared by every candidate,
/// so candidates are compared on identical folds. Ties prefer fewer trees, then shallower depth.
pub fn randomized_search_in<R: Rng + ?Sized>(
    grid: &SearchGrid,
    x: &FeatureMatrix,
    y: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<SearchOutcome, ImportanceError> {
    if budget == 0 {
        return Err(ImportanceError::InvalidConfig("search budget must be at least 1"));
    }
    if grid.is_empty() {
        return Err(ImportanceError::InvalidConfig("search grid has an empty axis"));
    }
    check_inputs(x, y)?;
    if x.n_rows() < 2 {
        return Err(ImportanceError::TooFewRows);
    }
    let fold_seed: u64 = rng.gen();
    let forest_seed: u64 = rng.gen();

    let mut evaluated = Vec::with_capacity(budget);
    let mut folds = DEFAULT_FOLDS;
    for _ in 0..budget {
        let cfg = grid.sample(rng, forest_seed);
        let (score, used) = cross_val_r2(x, y, &cfg, DEFAULT_FOLDS, fold_seed)?;
        folds = used;
        evaluated.push((cfg, score));
    }
    let (config, cv_r2) = evaluated.iter().min_by(|a, b| compare_candidates(a, b)).cloned().expect("budget >= 1");
    let warning =
        (folds < DEFAULT_FOLDS).then(|| format!("only {} rows; cross-validation reduced to {folds} folds", x.n_rows()));
    Ok(SearchOutcome { config, cv_r2, folds, evaluated, warning })
}

/// Orders candidates best first.
fn compare_candidates(a: &(ForestConfig, f64), b: &(ForestConfig, f64)) -> Ordering {
    let depth = |c: &ForestConfig| c.max_depth.unwrap_or(usize::MAX);
    b.1.total_cmp(&a.1).then(a.0.n_trees.cmp(&b.0.n_trees)).then(depth(&a.0).cmp(&depth(&b.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::fit_forest;

    fn problem(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            data.extend([a, b]);
            y.push(4.0 * a + rng.gen_range(-0.1..0.1));
        }
        (FeatureMatrix::new(vec!["a".into(), "b".into()], data).unwrap(), y)
    }

    fn small_grid() -> SearchGrid {
        SearchGrid {
            n_trees: vec![5, 10],
            max_depth: vec![Some(2), Some(4), None],
            min_samples_leaf: vec![1, 5],
            max_features_fraction: vec![0.5, 1.0],
        }
    }

    #[test]
    fn budget_one_returns_the_sampled_config() {
        let (x, y) = problem(40, 1);
        let out = randomized_search_in(&small_grid(), &x, &y, 1, &mut rng_from_seed(3)).unwrap();
        assert_eq!(out.evaluated.len(), 1);
        assert_eq!(out.config, out.evaluated[0].0);
        assert_eq!(out.folds, 5);
        assert!(out.warning.is_none());
    }

    #[test]
    fn same_seed_same_selection() {
        let (x, y) = problem(40, 2);
        let a = randomized_search_in(&small_grid(), &x, &y, 4, &mut rng_from_seed(9)).unwrap();
        let b = randomized_search_in(&small_grid(), &x, &y, 4, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_score_is_selected() {
        let (x, y) = problem(60, 3);
        let out = randomized_search_in(&small_grid(), &x, &y, 6, &mut rng_from_seed(4)).unwrap();
        for (_, s) in &out.evaluated {
            assert!(out.cv_r2 >= *s);
        }
    }

    #[test]
    fn ties_prefer_fewer_trees_then_shallower() {
        let c = |n_trees, depth| (ForestConfig { n_trees, max_depth: depth, ..ForestConfig::default() }, 0.5);
        let mut v = [c(100, None), c(50, Some(9)), c(50, Some(4)), c(100, Some(3))];
        v.sort_by(compare_candidates);
        assert_eq!(v[0].0.max_depth, Some(4));
        assert_eq!(v[1].0.max_depth, Some(9));
        assert_eq!(v[2].0.max_depth, Some(3));
        assert_eq!(v[3].0.max_depth, None);
    }

    #[test]
    fn few_rows_reduce_folds() {
        let (x, y) = problem(3, 4);
        let out = randomized_search_in(&small_grid(), &x, &y, 2, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.folds, 3);
        assert!(out.warning.is_some());
        let (x, y) = problem(1, 4);
        assert_eq!(
            randomized_search_in(&small_grid(), &x, &y, 2, &mut rng_from_seed(0)),
            Err(ImportanceError::TooFewRows)
        );
        assert!(matches!(
            randomized_search_in(&small_grid(), &x, &y, 0, &mut rng_from_seed(0)),
            Err(ImportanceError::InvalidConfig(_))
        ));
    }

    /// Independent k-fold: recompute folds by hand and score each held-out row.
    #[test]
    fn cross_validation_matches_manual_folds() {
        let (x, y) = problem(23, 5);
        let cfg = ForestConfig { n_trees: 3, max_depth: Some(3), ..ForestConfig::default() };
        let (score, k) = cross_val_r2(&x, &y, &cfg, 5, 77).unwrap();
        assert_eq!(k, 5);
        let mut order: Vec<usize> = (0..23).collect();
        order.shuffle(&mut rng_from_seed(77));
        let sizes = [4, 5, 4, 5, 5];
        let mut pos = 0;
        let mut pred = vec![f64::NAN; 23];
        for s in sizes {
            let held: Vec<usize> = order[pos..pos + s].to_vec();
            let train: Vec<usize> = order.iter().copied().filter(|r| !held.contains(r)).collect();
            let sub = x.select_rows(&train);
            let sub_y: Vec<f64> = train.iter().map(|&r| y[r]).collect();
            let f = fit_forest(&sub, &sub_y, &cfg).unwrap();
            for &r in &held {
                pred[r] = f.predict(x.row(r));
            }
            pos += s;
        }
        // Bootstrap draws index the training list, so a re-indexed subset reproduces the fit.
        assert!((score - r_squared(&y, &pred)).abs() < 1e-12);
    }

    #[test]
    fn default_grid_layout() {
        let g = SearchGrid::default();
        assert_eq!(g.n_trees, [50, 100, 150, 200, 250, 300]);
        assert_eq!(g.max_depth.len(), 19);
        assert_eq!(g.max_depth.last(), Some(&None));
        assert_eq!(g.min_samples_leaf, (1..=10).collect::<Vec<_>>());
        assert_eq!(g.max_features_fraction.len(), 8);
        assert!((g.max_features_fraction[0] - 0.3).abs() < 1e-12);
        assert!(g.max_features_fraction.contains(&1.0));
        assert!(g.n_trees.contains(&ForestConfig::default().n_trees));
    }
}
