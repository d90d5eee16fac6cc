use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resil_core::par::{derive_seed, map_indexed, Schedule};

use super::tree::{RegressionTree, TreeParams};

/// Random forest: bootstrap rows per tree and a fresh random feature subset
/// at every node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        n_trees: usize,
        max_depth: usize,
        subsample: f64,
        seed: u64,
    ) -> Forest {
        let n = x.len();
        let d = x[0].len();
        let params = TreeParams {
            max_depth,
            min_leaf: 1,
            max_features: Some(((subsample * d as f64).round() as usize).clamp(1, d)),
        };
        let trees = map_indexed(n_trees, Schedule::default(), |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            RegressionTree::fit(x, y, &rows, params, Some(&mut rng))
        });
        Forest { trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Least-squares gradient boosting: starts at the target mean, then each
/// stage fits a tree to the current residuals and adds a shrunken copy.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Gbrt {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after each stage.
    pub train_mse: Vec<f64>,
}

impl Gbrt {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        n_stages: usize,
        learning_rate: f64,
        max_depth: usize,
    ) -> Gbrt {
        let n = x.len();
        let rows: Vec<usize> = (0..n).collect();
        let params = TreeParams {
            max_depth,
            min_leaf: 1,
            max_features: None,
        };
        let init = y.iter().sum::<f64>() / n as f64;
        let mut fitted = vec![init; n];
        let mut trees = Vec::with_capacity(n_stages);
        let mut train_mse = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            let residual: Vec<f64> = y.iter().zip(&fitted).map(|(t, f)| t - f).collect();
            let tree = RegressionTree::fit::<ChaCha8Rng>(x, &residual, &rows, params, None);
            for (f, r) in fitted.iter_mut().zip(x) {
                *f += learning_rate * tree.predict(r);
            }
            trees.push(tree);
            train_mse.push(
                y.iter()
                    .zip(&fitted)
                    .map(|(t, f)| (t - f).powi(2))
                    .sum::<f64>()
                    / n as f64,
            );
        }
        Gbrt {
            init,
            learning_rate,
            trees,
            train_mse,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}
