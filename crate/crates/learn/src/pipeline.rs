use resil_core::par::derive_seed;

use crate::cv::CvConfig;
use crate::dataset::{select_columns, Dataset, Target};
use crate::model::{ModelKind, ModelSpec};
use crate::predictor::{bag_models, TrainedPredictor};
use crate::ranking::{rank_features, FeatureRanking, MiBins};
use crate::search::{default_grid, grid_search, top_k_sweep, Grid, GridResult, SweepResult};
use crate::whiten::{whiten_apply, whiten_fit};
use crate::{LearnError, Result};

/// Fewest rows the full pipeline accepts.
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kind: ModelKind,
    /// `None` uses [`default_grid`].
    pub grid: Option<Grid>,
    /// Folds, metric and schedule; the seed field is overridden by `seed`.
    pub cv: CvConfig,
    pub bags: usize,
    pub mi_bins: MiBins,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: ModelKind::Gbrt,
            grid: None,
            cv: CvConfig::default(),
            bags: 10,
            mi_bins: MiBins::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingReport {
    pub target: Target,
    pub rows: usize,
    pub width: usize,
    pub seed: u64,
    pub ranking: FeatureRanking,
    pub sweep: SweepResult,
    pub grid: GridResult,
    pub chosen_k: usize,
    pub chosen_spec: ModelSpec,
    /// Cross-validated mean and variance of the chosen spec on the chosen
    /// features.
    pub cv_mean: f64,
    pub cv_variance: f64,
    pub bags: usize,
}

/// Whiten, rank and vote, sweep top-k, grid-search, then bag.
///
/// Ranking runs on the raw columns: after whitening every column has unit
/// variance and the variance criterion would carry no information.
pub fn train_pipeline(
    dataset: &Dataset,
    target: Target,
    config: &PipelineConfig,
) -> Result<(TrainedPredictor, TrainingReport)> {
    let n = dataset.len();
    let needed = MIN_ROWS.max(config.cv.k);
    if n < needed {
        return Err(LearnError::TooFewRows { needed, got: n });
    }
    let y = dataset.target(target);
    let cv = CvConfig {
        seed: config.seed,
        ..config.cv
    };

    let whitener = whiten_fit(&dataset.x)?;
    let xw = whiten_apply(&whitener, &dataset.x)?;
    let ranking = rank_features(&dataset.x, y, config.mi_bins)?;
    let sweep = top_k_sweep(&xw, y, &ModelSpec::new(config.kind), &ranking, &cv)?;
    let xs = select_columns(&xw, &sweep.selected);
    let grid_spec = config
        .grid
        .clone()
        .unwrap_or_else(|| default_grid(config.kind));
    let grid = grid_search(config.kind, &grid_spec, &xs, y, &cv)?;
    let ensemble = bag_models(
        &grid.best,
        &xs,
        y,
        config.bags,
        derive_seed(config.seed, 1),
        cv.schedule,
    )?;

    let predictor = TrainedPredictor::new(
        target,
        grid.best.clone(),
        whitener,
        sweep.selected.clone(),
        ensemble,
    );
    let report = TrainingReport {
        target,
        rows: n,
        width: dataset.width(),
        seed: config.seed,
        chosen_k: sweep.best_k,
        chosen_spec: grid.best.clone(),
        cv_mean: grid.best_cv.mean,
        cv_variance: grid.best_cv.variance,
        bags: config.bags.max(1),
        ranking,
        sweep,
        grid,
    };
    Ok((predictor, report))
}
