//! The regression models and their hyperparameter specs.

mod ensemble;
mod knn;
mod ridge;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use ensemble::{Forest, Gbrt};
pub use knn::Knn;
pub use ridge::Ridge;
pub use tree::{RegressionTree, TreeParams};

use crate::dataset::check_width;
use crate::{LearnError, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Knn,
    Tree,
    Forest,
    Gbrt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Ridge,
        ModelKind::Knn,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Gbrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Knn => "knn",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Gbrt => "gbrt",
        }
    }

    /// Hyperparameter names and their default values.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelKind::Ridge => &[("lambda", 0.1)],
            ModelKind::Knn => &[("k", 5.0)],
            ModelKind::Tree => &[("max_depth", 6.0), ("min_leaf", 1.0)],
            ModelKind::Forest => &[
                ("feature_subsample", 0.33),
                ("max_depth", 8.0),
                ("n_trees", 100.0),
            ],
            ModelKind::Gbrt => &[
                ("learning_rate", 0.1),
                ("max_depth", 3.0),
                ("n_stages", 100.0),
            ],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LearnError::UnknownModelKind(s.to_string()))
    }
}

/// A model kind with a full set of hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, f64>,
}

fn valid_value(name: &str, value: f64) -> bool {
    let whole = value.fract() == 0.0;
    match name {
        "lambda" => value.is_finite() && value >= 0.0,
        "k" | "n_trees" | "n_stages" | "min_leaf" | "max_depth" => {
            whole && (1.0..=1e6).contains(&value)
        }
        "learning_rate" | "feature_subsample" => value > 0.0 && value <= 1.0,
        _ => false,
    }
}

impl ModelSpec {
    /// The kind with its default hyperparameters.
    pub fn new(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            hyperparameters: kind
                .defaults()
                .iter()
                .map(|&(n, v)| (n.to_string(), v))
                .collect(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<ModelSpec> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !self.kind.defaults().iter().any(|&(n, _)| n == name) {
            return Err(LearnError::UnknownHyperparameter {
                kind: self.kind,
                name: name.to_string(),
            });
        }
        if !valid_value(name, value) {
            return Err(LearnError::InvalidHyperparameter {
                name: name.to_string(),
                value,
            });
        }
        self.hyperparameters.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> f64 {
        self.hyperparameters[name]
    }

    fn count(&self, name: &str) -> usize {
        self.get(name) as usize
    }

    /// Checks that the names are exactly the kind's names and every value
    /// is in range. Specs read from files go through this.
    pub fn validate(&self) -> Result<()> {
        for (name, &value) in &self.hyperparameters {
            let mut probe = ModelSpec::new(self.kind);
            probe.set(name, value)?;
        }
        if let Some(&(missing, _)) = self
            .kind
            .defaults()
            .iter()
            .find(|(n, _)| !self.hyperparameters.contains_key(*n))
        {
            return Err(LearnError::Format(format!(
                "{} spec lacks `{missing}`",
                self.kind
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for (i, (name, value)) in self.hyperparameters.iter().enumerate() {
            write!(f, "{}{name}={value}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// Parses `kind` or `kind:name=value,name=value`; unnamed parameters keep
/// their defaults.
impl FromStr for ModelSpec {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = ModelSpec::new(kind.trim().parse()?);
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = pair
                .split_once('=')
                .ok_or_else(|| LearnError::Format(format!("expected name=value, got `{pair}`")))?;
            let value: f64 =
                value
                    .trim()
                    .parse()
                    .map_err(|_| LearnError::InvalidHyperparameter {
                        name: name.trim().to_string(),
                        value: f64::NAN,
                    })?;
            spec.set(name.trim(), value)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Ridge(Ridge),
    Knn(Knn),
    Tree(RegressionTree),
    Forest(Forest),
    Gbrt(Gbrt),
}

impl Model {
    /// Fits `spec` to rows `x` and targets `y`. Randomized kinds draw from
    /// `seed` only.
    pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Model> {
        spec.validate()?;
        if x.is_empty() {
            return Err(LearnError::TooFewRows { needed: 1, got: 0 });
        }
        if x.len() != y.len() {
            return Err(LearnError::Format(format!(
                "{} rows but {} targets",
                x.len(),
                y.len()
            )));
        }
        check_width(x, x[0].len())?;
        Ok(match spec.kind {
            ModelKind::Ridge => Model::Ridge(Ridge::fit(x, y, spec.get("lambda"))?),
            ModelKind::Knn => Model::Knn(Knn::fit(x, y, spec.count("k"))),
            ModelKind::Tree => {
                let rows: Vec<usize> = (0..x.len()).collect();
                let params = TreeParams {
                    max_depth: spec.count("max_depth"),
                    min_leaf: spec.count("min_leaf"),
                    max_features: None,
                };
                Model::Tree(RegressionTree::fit::<rand_chacha::ChaCha8Rng>(
                    x, y, &rows, params, None,
                ))
            }
            ModelKind::Forest => Model::Forest(Forest::fit(
                x,
                y,
                spec.count("n_trees"),
                spec.count("max_depth"),
                spec.get("feature_subsample"),
                seed,
            )),
            ModelKind::Gbrt => Model::Gbrt(Gbrt::fit(
                x,
                y,
                spec.count("n_stages"),
                spec.get("learning_rate"),
                spec.count("max_depth"),
            )),
        })
    }

    /// Raw, unclamped prediction.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Model::Ridge(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Gbrt(m) => m.predict(x),
        }
    }
}
