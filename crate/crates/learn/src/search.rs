use std::collections::BTreeMap;

use resil_core::par::map_indexed;

use crate::cv::{kfold_cv, CvConfig, CvResult};
use crate::dataset::select_columns;
use crate::model::{ModelKind, ModelSpec};
use crate::ranking::FeatureRanking;
use crate::{LearnError, Result};

pub type Grid = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepResult {
    pub best_k: usize,
    /// The first `best_k` features of the global ranking.
    pub selected: Vec<usize>,
    /// `(k, cv mean)` for every swept k.
    pub curve: Vec<(usize, f64)>,
}

/// Cross-validates `spec` on the top-k globally ranked features for
/// k = 2..=d and keeps the best k; ties go to the smaller k.
pub fn top_k_sweep(
    x: &[Vec<f64>],
    y: &[f64],
    spec: &ModelSpec,
    ranking: &FeatureRanking,
    cv: &CvConfig,
) -> Result<SweepResult> {
    let d = ranking.global.len();
    let ks: Vec<usize> = if d < 2 { vec![d] } else { (2..=d).collect() };
    let results = map_indexed(ks.len(), cv.schedule, |i| {
        let cols = &ranking.global[..ks[i]];
        kfold_cv(&select_columns(x, cols), y, spec, cv).map(|r| r.mean)
    });
    let mut curve = Vec::with_capacity(ks.len());
    for (k, r) in ks.iter().zip(results) {
        curve.push((*k, r?));
    }
    let &(best_k, _) = curve
        .iter()
        .reduce(|best, c| if c.1 > best.1 { c } else { best })
        .expect("at least one k is swept");
    Ok(SweepResult {
        best_k,
        selected: ranking.global[..best_k].to_vec(),
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridResult {
    pub best: ModelSpec,
    pub best_cv: CvResult,
    /// Every evaluated spec in grid order with its cv mean, `None` when
    /// fitting failed.
    pub evaluated: Vec<(ModelSpec, Option<f64>)>,
}

/// All hyperparameter combinations in grid order: keys in name order, the
/// first key varying slowest, values in the order given.
pub fn grid_points(kind: ModelKind, grid: &Grid) -> Result<Vec<ModelSpec>> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(LearnError::EmptyGrid);
    }
    let mut points = vec![ModelSpec::new(kind)];
    for (name, values) in grid {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for &v in values {
                next.push(p.clone().with(name, v)?);
            }
        }
        points = next;
    }
    Ok(points)
}

/// Exhaustive search over `grid` by cross-validated score. Ties keep the
/// earliest point; a point whose fit fails scores below every other.
pub fn grid_search(
    kind: ModelKind,
    grid: &Grid,
    x: &[Vec<f64>],
    y: &[f64],
    cv: &CvConfig,
) -> Result<GridResult> {
    let points = grid_points(kind, grid)?;
    let results = map_indexed(points.len(), cv.schedule, |i| {
        kfold_cv(x, y, &points[i], cv)
    });
    let mut best: Option<(usize, CvResult)> = None;
    let mut first_err = None;
    let mut evaluated = Vec::with_capacity(points.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                evaluated.push((points[i].clone(), Some(r.mean)));
                if best.as_ref().is_none_or(|(_, b)| r.mean > b.mean) {
                    best = Some((i, r));
                }
            }
            Err(e) => {
                evaluated.push((points[i].clone(), None));
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((i, best_cv)) => Ok(GridResult {
            best: points[i].clone(),
            best_cv,
            evaluated,
        }),
        None => Err(first_err.expect("grid is nonempty")),
    }
}

/// Built-in grid of each kind.
pub fn default_grid(kind: ModelKind) -> Grid {
    let entries: &[(&str, &[f64])] = match kind {
        ModelKind::Gbrt => &[
            ("learning_rate", &[0.05, 0.1, 0.3]),
            ("max_depth", &[2.0, 3.0]),
            ("n_stages", &[50.0, 100.0, 200.0]),
        ],
        ModelKind::Forest => &[("max_depth", &[4.0, 8.0]), ("n_trees", &[50.0, 200.0])],
        ModelKind::Knn => &[("k", &[1.0, 3.0, 5.0, 9.0])],
        ModelKind::Ridge => &[("lambda", &[0.0, 0.01, 0.1, 1.0])],
        ModelKind::Tree => &[
            ("max_depth", &[2.0, 4.0, 6.0, 8.0]),
            ("min_leaf", &[1.0, 3.0]),
        ],
    };
    entries
        .iter()
        .map(|(n, v)| (n.to_string(), v.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_size() {
        let mut g = Grid::new();
        g.insert("max_depth".into(), vec![2.0, 4.0]);
        g.insert("min_leaf".into(), vec![1.0, 2.0, 3.0]);
        let p = grid_points(ModelKind::Tree, &g).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!((p[0].get("max_depth"), p[0].get("min_leaf")), (2.0, 1.0));
        assert_eq!((p[1].get("max_depth"), p[1].get("min_leaf")), (2.0, 2.0));
        assert_eq!((p[3].get("max_depth"), p[3].get("min_leaf")), (4.0, 1.0));
    }

    #[test]
    fn bad_grids() {
        assert_eq!(
            grid_points(ModelKind::Knn, &Grid::new()),
            Err(LearnError::EmptyGrid)
        );
        let mut g = Grid::new();
        g.insert("lambda".into(), vec![1.0]);
        assert!(matches!(
            grid_points(ModelKind::Knn, &g),
            Err(LearnError::UnknownHyperparameter { .. })
        ));
    }

    #[test]
    fn default_grid_sizes() {
        let sizes: Vec<usize> = ModelKind::ALL
            .iter()
            .map(|&k| grid_points(k, &default_grid(k)).unwrap().len())
            .collect();
        assert_eq!(sizes, vec![4, 4, 8, 4, 18]);
    }
}
