use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tree::{fit_tree_rows, RegressionTree};
use super::{check_inputs, r_squared, FeatureMatrix, ForestConfig, ImportanceError};
use crate::seed::{derive_seed, rng_from_seed};

/// An ensemble of regression trees; predictions are the mean over trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
    oob_r2: Option<f64>,
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Out-of-bag R^2 over rows left out by at least one tree. `None` without bootstrap or when
    /// every row was drawn by every tree.
    pub fn oob_r2(&self) -> Option<f64> {
        self.oob_r2
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &FeatureMatrix, y: &[f64], cfg: &ForestConfig) -> Result<Forest, ImportanceError> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    Ok(fit_forest_rows(x, y, &rows, cfg))
}

/// Fits a forest on the subset `rows` of `x`. Tree `t` draws from the generator seeded with
/// `derive_seed(cfg.rng_seed, t)`, so the result does not depend on thread count.
pub fn fit_forest_rows(x: &FeatureMatrix, y: &[f64], rows: &[usize], cfg: &ForestConfig) -> Forest {
    let grow = |t: usize| {
        let mut rng = rng_from_seed(derive_seed(cfg.rng_seed, t as u64));
        let sample: Vec<usize> = if cfg.bootstrap {
            (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
        } else {
            rows.to_vec()
        };
        let tree = fit_tree_rows(x, y, &sample, cfg, &mut rng);
        (tree, sample)
    };

    #[cfg(feature = "parallel")]
    let grown: Vec<(RegressionTree, Vec<usize>)> = {
        use rayon::prelude::*;
        (0..cfg.n_trees).into_par_iter().map(grow).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let grown: Vec<(RegressionTree, Vec<usize>)> = (0..cfg.n_trees).map(grow).collect();

    let oob_r2 = if cfg.bootstrap { oob_score(x, y, rows, &grown) } else { None };
    Forest { trees: grown.into_iter().map(|(t, _)| t).collect(), n_features: x.n_cols(), oob_r2 }
}

fn oob_score(x: &FeatureMatrix, y: &[f64], rows: &[usize], grown: &[(RegressionTree, Vec<usize>)]) -> Option<f64> {
    let n = x.n_rows();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    let mut in_bag = vec![false; n];
    for (tree, sample) in grown {
        for &r in sample {
            in_bag[r] = true;
        }
        for &r in rows {
            if !in_bag[r] {
                sum[r] += tree.predict(x.row(r));
                count[r] += 1;
            }
        }
        for &r in sample {
            in_bag[r] = false;
        }
    }
    let (truth, pred): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|&&r| count[r] > 0).map(|&r| (y[r], sum[r] / count[r] as f64)).unzip();
    if truth.is_empty() {
        None
    } else {
        Some(r_squared(&truth, &pred))
    }
}

/// Normalized mean-decrease-impurity importances.
#[derive(Debug, Clone, PartialEq)]
pub struct MdiImportance {
    /// Sums to 1.
    pub values: Vec<f64>,
    /// Set when no tree made a split, in which case `values` is uniform.
    pub uniform_fallback: bool,
}

/// Averages each tree's impurity importance over the forest and normalizes to sum 1.
pub fn mdi_importance(forest: &Forest) -> MdiImportance {
    let d = forest.n_features;
    let mut raw = vec![0.0; d];
    for tree in &forest.trees {
        for (acc, v) in raw.iter_mut().zip(tree.impurity_importance()) {
            *acc += v;
        }
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return MdiImportance { values: vec![1.0 / d as f64; d], uniform_fallback: true };
    }
    MdiImportance { values: raw.iter().map(|v| v / total).collect(), uniform_fallback: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::{fit_tree, Node};
    use alloc::format;
    use alloc::string::String;
    use rand::Rng;

    fn matrix(cols: usize, data: Vec<f64>) -> FeatureMatrix {
        let names = (0..cols).map(|i| format!("x{i}")).collect::<Vec<String>>();
        FeatureMatrix::new(names, data).unwrap()
    }

    fn random_problem(n: usize, d: usize, seed: u64, f: impl Fn(&[f64], f64) -> f64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise: f64 = rng.gen_range(-1.0..1.0);
            y.push(f(&row, noise));
            data.extend(row);
        }
        (matrix(d, data), y)
    }

    #[test]
    fn single_tree_without_bootstrap_matches_tree() {
        let (x, y) = random_problem(80, 3, 1, |r, e| r[0] + 0.5 * r[1] + 0.1 * e);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            rng_seed: 42,
            max_features_fraction: 0.6,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&x, &y, &cfg).unwrap();
        let tree = fit_tree(&x, &y, &cfg, &mut rng_from_seed(derive_seed(42, 0))).unwrap();
        assert_eq!(forest.trees()[0], tree);
        for r in 0..x.n_rows() {
            assert_eq!(forest.predict(x.row(r)), tree.predict(x.row(r)));
        }
        assert_eq!(forest.oob_r2(), None);
    }

    #[test]
    fn linear_signal_has_high_oob_r2() {
        let (x, y) = random_problem(200, 3, 2, |r, e| 3.0 * r[0] + 0.1 * e);
        let forest = fit_forest(&x, &y, &ForestConfig::default()).unwrap();
        let r2 = forest.oob_r2().unwrap();
        assert!(r2 > 0.8, "oob r2 {r2}");
    }

    #[test]
    fn constant_target_predicts_constant() {
        let (x, _) = random_problem(30, 4, 6, |_, _| 0.0);
        let forest = fit_forest(&x, &[1.5; 30], &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        for probe in [[0.0; 4], [9.0, -9.0, 0.5, 3.0]] {
            assert_eq!(forest.predict(&probe), 1.5);
        }
        let imp = mdi_importance(&forest);
        assert!(imp.uniform_fallback);
        assert_eq!(imp.values, vec![0.25; 4]);
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = random_problem(60, 2, 10, |r, e| r[0] * r[1] + e);
        let forest = fit_forest(&x, &y, &ForestConfig { n_trees: 7, ..ForestConfig::default() }).unwrap();
        for r in 0..10 {
            let row = x.row(r);
            let mean = forest.trees().iter().map(|t| t.predict(row)).sum::<f64>() / 7.0;
            assert!((forest.predict(row) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_signal_dominates_mdi() {
        let (x, y) = random_problem(400, 4, 3, |r, _| r[0] * r[0]);
        let forest = fit_forest(&x, &y, &ForestConfig { n_trees: 50, ..ForestConfig::default() }).unwrap();
        let imp = mdi_importance(&forest);
        assert!(!imp.uniform_fallback);
        assert!((imp.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.values.iter().all(|v| *v >= 0.0));
        assert!(imp.values[0] > 0.8, "{:?}", imp.values);
    }

    #[test]
    fn pure_noise_spreads_importance() {
        let d = 5;
        for repeat in 0..10 {
            let (x, y) = random_problem(300, d, 100 + repeat, |_, e| e);
            let cfg = ForestConfig { n_trees: 30, rng_seed: repeat, ..ForestConfig::default() };
            let imp = mdi_importance(&fit_forest(&x, &y, &cfg).unwrap());
            for v in &imp.values {
                assert!(*v <= 3.0 / d as f64, "{:?}", imp.values);
            }
        }
    }

    /// The signal column alone versus the same column duplicated.
    #[test]
    fn duplicate_features_share_importance() {
        let mut rng = rng_from_seed(5);
        let mut single = Vec::new();
        let mut doubled = Vec::new();
        let mut y = Vec::new();
        for _ in 0..300 {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let c: f64 = rng.gen_range(0.0..1.0);
            single.extend([a, b, c]);
            doubled.extend([a, a, b, c]);
            y.push(2.0 * a + 0.3 * b + 0.1 * rng.gen_range(-1.0..1.0));
        }
        let cfg = ForestConfig { n_trees: 100, max_features_fraction: 0.5, ..ForestConfig::default() };
        let one = mdi_importance(&fit_forest(&matrix(3, single), &y, &cfg).unwrap());
        let two = mdi_importance(&fit_forest(&matrix(4, doubled), &y, &cfg).unwrap());
        let pair = two.values[0] + two.values[1];
        assert!((pair - one.values[0]).abs() < 0.1, "{:?} vs {:?}", one.values, two.values);
        assert!(two.values[0] > 0.25 * pair && two.values[1] > 0.25 * pair, "{:?}", two.values);
    }

    /// Targets on a binary grid so that `y + 1000` is exact.
    #[test]
    fn target_shift_changes_no_split() {
        let (x, y) = random_problem(200, 3, 7, |r, e| r[0] - 2.0 * r[2] * r[2] + 0.2 * e);
        let y: Vec<f64> = y.iter().map(|v| libm::round(v * 1024.0) / 1024.0).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 1000.0).collect();
        let cfg = ForestConfig { n_trees: 20, rng_seed: 9, max_features_fraction: 0.7, ..ForestConfig::default() };
        let a = fit_forest(&x, &y, &cfg).unwrap();
        let b = fit_forest(&x, &shifted, &cfg).unwrap();
        let splits = |f: &Forest| -> Vec<(usize, f64, f64)> {
            f.trees()
                .iter()
                .flat_map(|t| t.nodes().iter())
                .filter_map(|n| match n {
                    Node::Split { feature, threshold, sse_decrease, .. } => Some((*feature, *threshold, *sse_decrease)),
                    Node::Leaf { .. } => None,
                })
                .collect()
        };
        assert_eq!(splits(&a), splits(&b));
        assert_eq!(mdi_importance(&a), mdi_importance(&b));
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = random_problem(100, 3, 8, |r, e| r[1] + e);
        let cfg = ForestConfig { n_trees: 10, max_features_fraction: 0.5, rng_seed: 3, ..ForestConfig::default() };
        assert_eq!(fit_forest(&x, &y, &cfg).unwrap(), fit_forest(&x, &y, &cfg).unwrap());
    }
}
