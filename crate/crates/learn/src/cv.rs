use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resil_core::par::{derive_seed, map_indexed, Schedule};

use crate::metric::Metric;
use crate::model::{Model, ModelSpec};
use crate::{LearnError, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvResult {
    /// Mean of the defined fold scores.
    pub mean: f64,
    /// Population variance of the defined fold scores.
    pub variance: f64,
    /// Per-fold score, `None` where the metric is undefined on every row.
    pub folds: Vec<Option<f64>>,
}

/// Test folds of a seeded shuffle of `0..n`. Fold `i` takes shuffled
/// positions `[i*n/k, (i+1)*n/k)`, so sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..k)
        .map(|i| order[i * n / k..(i + 1) * n / k].to_vec())
        .collect()
}

/// Fold count, shuffle seed, score and schedule of a cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub metric: Metric,
    #[serde(skip)]
    pub schedule: Schedule,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 10,
            seed: 0,
            metric: Metric::Accuracy,
            schedule: Schedule::default(),
        }
    }
}

/// k-fold cross-validation of `spec`. Predictions are clamped to `[0, 1]`
/// before scoring, as they are at prediction time. Fold `f` fits its model
/// with a seed derived from `(seed, f)`.
pub fn kfold_cv(x: &[Vec<f64>], y: &[f64], spec: &ModelSpec, cv: &CvConfig) -> Result<CvResult> {
    let n = x.len();
    let k = cv.k;
    if k < 2 || n < k {
        return Err(LearnError::TooFewRows {
            needed: k.max(2),
            got: n,
        });
    }
    let folds = fold_partition(n, k, cv.seed);
    let scores = map_indexed(k, cv.schedule, |f| -> Result<Option<f64>> {
        let mut in_test = vec![false; n];
        for &r in &folds[f] {
            in_test[r] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
        let model = Model::fit(
            spec,
            &select_rows(x, &train),
            &train.iter().map(|&r| y[r]).collect::<Vec<_>>(),
            derive_seed(cv.seed, f as u64),
        )?;
        let predicted: Vec<f64> = folds[f]
            .iter()
            .map(|&r| model.predict(&x[r]).clamp(0.0, 1.0))
            .collect();
        let observed: Vec<f64> = folds[f].iter().map(|&r| y[r]).collect();
        Ok(cv.metric.score(&predicted, &observed))
    });
    let folds: Vec<Option<f64>> = scores.into_iter().collect::<Result<_>>()?;
    let defined: Vec<f64> = folds.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(LearnError::NoDefinedAccuracy);
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let variance = defined.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / defined.len() as f64;
    Ok(CvResult {
        mean,
        variance,
        folds,
    })
}

pub(crate) fn select_rows(x: &[Vec<f64>], rows: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&r| x[r].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    fn seq(k: usize) -> CvConfig {
        CvConfig {
            k,
            seed: 1,
            schedule: Schedule::Sequential,
            ..CvConfig::default()
        }
    }

    #[test]
    fn partition_sizes() {
        let folds = fold_partition(23, 10, 5);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn constant_target_is_perfect() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y = vec![0.4; 20];
        let r = kfold_cv(&x, &y, &ModelSpec::new(ModelKind::Gbrt), &seq(10)).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-12);
        assert!(r.variance < 1e-20);
    }

    #[test]
    fn needs_k_rows() {
        let x = vec![vec![0.0]; 3];
        let err = kfold_cv(&x, &[0.1; 3], &ModelSpec::new(ModelKind::Ridge), &seq(5));
        assert_eq!(
            err.unwrap_err(),
            LearnError::TooFewRows { needed: 5, got: 3 }
        );
    }

    #[test]
    fn all_zero_targets_are_undefined() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let err = kfold_cv(&x, &[0.0; 10], &ModelSpec::new(ModelKind::Knn), &seq(5));
        assert_eq!(err.unwrap_err(), LearnError::NoDefinedAccuracy);
    }
}
