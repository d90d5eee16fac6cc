//! Regression side of resilience prediction: whitening, feature ranking by
//! rank voting, k-fold cross-validation, top-k and grid search, bagging and
//! the relative-error accuracy metric.

pub mod cv;
pub mod dataset;
pub mod metric;
pub mod model;
pub mod pipeline;
pub mod predictor;
pub mod ranking;
pub mod search;
pub mod whiten;

pub use cv::{fold_partition, kfold_cv, CvConfig, CvResult};
pub use dataset::{Dataset, Target};
pub use metric::{prediction_accuracy, Metric};
pub use model::{Model, ModelKind, ModelSpec};
pub use pipeline::{train_pipeline, PipelineConfig, TrainingReport};
pub use predictor::{bagging_train, train, TrainedPredictor};
pub use ranking::{rank_features, FeatureRanking, MiBins};
pub use search::{
    default_grid, grid_points, grid_search, top_k_sweep, Grid, GridResult, SweepResult,
};
pub use whiten::{whiten_apply, whiten_fit, Whitener};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("unknown hyperparameter `{name}` for {kind}")]
    UnknownHyperparameter { kind: ModelKind, name: String },
    #[error("invalid value {value} for hyperparameter `{name}`")]
    InvalidHyperparameter { name: String, value: f64 },
    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),
    #[error("singular system: features are collinear and lambda is 0")]
    Singular,
    #[error("no row has a nonzero observed rate, accuracy is undefined")]
    NoDefinedAccuracy,
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LearnError>;
