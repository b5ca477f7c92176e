use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::learners::tree::{fit_rows, normalize, FeatureSampling};
use crate::learners::{check_training_data, Classifier, DecisionTreeModel, TreeParams};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Features evaluated per node; `None` means ⌊√width⌋.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeParams::default(),
            features_per_split: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl RandomForestParams {
    pub fn resolved_features_per_split(&self, width: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| ((width as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub params: RandomForestParams,
    pub trees: Vec<DecisionTreeModel>,
}

/// Bagged CART ensemble. Tree `b` uses seed `params.seed + b` for its
/// bootstrap draw and for the per-node feature subsets, so the result does not
/// depend on how trees are scheduled across threads.
pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[u8],
    params: &RandomForestParams,
) -> Result<RandomForestModel> {
    let width = check_training_data(x, y)?;
    params.tree.validate()?;
    let per_split = params.resolved_features_per_split(width);
    if params.n_trees == 0 || per_split == 0 || per_split > width {
        return Err(Error::InvalidConfig(format!(
            "forest needs n_trees ≥ 1 and 1 ≤ features_per_split ≤ {width}"
        )));
    }
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|b| {
            let tree_seed = params.seed.wrapping_add(b as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut r = rng::seeded(tree_seed);
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = TreeParams {
                seed: tree_seed,
                ..params.tree
            };
            let sampling = FeatureSampling {
                per_split,
                seed: tree_seed,
            };
            fit_rows(x, y, rows, &tree_params, Some(sampling))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForestModel {
        params: *params,
        trees,
    })
}

impl RandomForestModel {
    /// Impurity decrease summed over all trees, normalized to sum 1.
    pub fn feature_importances(&self) -> Vec<f64> {
        let width = self.n_features();
        let mut total = vec![0.0; width];
        for t in &self.trees {
            for (acc, v) in total.iter_mut().zip(t.raw_importances()) {
                *acc += v;
            }
        }
        normalize(total)
    }
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    /// Mean of the trees' leaf fractions.
    fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_decision_tree;

    fn toy(n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let i = i as f64;
                vec![(i * 7.3) % 11.0, (i * 3.1) % 5.0, i, (i * 1.7) % 3.0]
            })
            .collect();
        let y = x.iter().map(|r| u8::from(r[2] >= n as f64 / 2.0)).collect();
        (x, y)
    }

    #[test]
    fn single_full_tree_matches_cart() {
        let (x, y) = toy(40);
        let tp = TreeParams::default();
        let p = RandomForestParams {
            n_trees: 1,
            tree: tp,
            features_per_split: Some(4),
            bootstrap: false,
            seed: 42,
        };
        let f = fit_random_forest(&x, &y, &p).unwrap();
        let t = fit_decision_tree(&x, &y, &tp).unwrap();
        for r in &x {
            assert_eq!(f.score(r), t.score(r));
        }
        assert_eq!(f.feature_importances(), t.feature_importances());
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = toy(60);
        let p = RandomForestParams {
            n_trees: 25,
            ..Default::default()
        };
        let a = fit_random_forest(&x, &y, &p).unwrap();
        let b = fit_random_forest(&x, &y, &p).unwrap();
        assert_eq!(a, b);
        let probe = [3.0, 1.0, 17.5, 2.0];
        assert_eq!(a.score(&probe).to_bits(), b.score(&probe).to_bits());
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i >= 15)).collect();
        let p = RandomForestParams {
            n_trees: 15,
            tree: TreeParams {
                max_depth: 3,
                min_samples_split: 2,
                min_samples_leaf: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let f = fit_random_forest(&x, &y, &p).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, &l)| f.predict(r) == l).count();
        assert_eq!(acc, 30);
    }

    #[test]
    fn rejects_bad_params() {
        let (x, y) = toy(10);
        let p = RandomForestParams {
            features_per_split: Some(5),
            ..Default::default()
        };
        assert!(matches!(
            fit_random_forest(&x, &y, &p),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            fit_random_forest(&[], &[], &RandomForestParams::default()),
            Err(Error::EmptyData)
        ));
    }
}
