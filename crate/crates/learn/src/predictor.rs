use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resil_core::par::{derive_seed, map_indexed, Schedule};

use crate::cv::select_rows;
use crate::dataset::{Dataset, Target};
use crate::model::{Model, ModelSpec};
use crate::whiten::{whiten_apply, whiten_fit, Whitener};
use crate::{LearnError, Result};

pub const MODEL_FORMAT: &str = "resil-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted model with its preprocessing: whiten the full feature row,
/// keep the selected columns, average the ensemble, clamp to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainedPredictor {
    pub format: String,
    pub version: u32,
    pub target: Target,
    pub spec: ModelSpec,
    pub whitener: Whitener,
    pub selected: Vec<usize>,
    pub ensemble: Vec<Model>,
}

impl TrainedPredictor {
    pub fn new(
        target: Target,
        spec: ModelSpec,
        whitener: Whitener,
        selected: Vec<usize>,
        ensemble: Vec<Model>,
    ) -> Self {
        TrainedPredictor {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            target,
            spec,
            whitener,
            selected,
            ensemble,
        }
    }

    /// Feature width expected by [`TrainedPredictor::predict`].
    pub fn width(&self) -> usize {
        self.whitener.width()
    }

    /// Raw output of every ensemble member.
    pub fn member_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.whitener.apply_row(x)?;
        let z: Vec<f64> = self.selected.iter().map(|&c| w[c]).collect();
        Ok(self.ensemble.iter().map(|m| m.predict(&z)).collect())
    }

    /// Ensemble mean before clamping.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        let out = self.member_outputs(x)?;
        Ok(out.iter().sum::<f64>() / out.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)?.clamp(0.0, 1.0))
    }

    /// Compact JSON: a bagged ensemble holds thousands of tree nodes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("predictor serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<TrainedPredictor> {
        #[derive(serde::Deserialize)]
        struct Header {
            format: Option<String>,
            version: Option<u64>,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        if header.format.as_deref() != Some(MODEL_FORMAT) {
            return Err(LearnError::Format(format!("not a {MODEL_FORMAT} file")));
        }
        match header.version {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            Some(v) => return Err(LearnError::Format(format!("unsupported version {v}"))),
            None => return Err(LearnError::Format("missing version".into())),
        }
        let p: TrainedPredictor =
            serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        p.spec.validate()?;
        let d = p.width();
        if p.whitener.matrix.len() != d || p.whitener.matrix.iter().any(|r| r.len() != d) {
            return Err(LearnError::Format(
                "whitening matrix is not square in the feature width".into(),
            ));
        }
        if p.ensemble.is_empty() || p.selected.iter().any(|&c| c >= d) {
            return Err(LearnError::Format(
                "empty ensemble or selected column out of range".into(),
            ));
        }
        Ok(p)
    }
}

/// Fits `b` members on bootstrap resamples of `(x, y)`. Member `i` draws
/// its resample and its model seed from `derive_seed(seed, i)`.
pub fn bag_models(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[f64],
    b: usize,
    seed: u64,
    schedule: Schedule,
) -> Result<Vec<Model>> {
    let n = x.len();
    if n == 0 {
        return Err(LearnError::TooFewRows { needed: 1, got: 0 });
    }
    map_indexed(b.max(1), schedule, |i| {
        let member_seed = derive_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        Model::fit(spec, &select_rows(x, &rows), &ys, rng.random())
    })
    .into_iter()
    .collect()
}

fn whitened(dataset: &Dataset) -> Result<(Whitener, Vec<Vec<f64>>)> {
    let w = whiten_fit(&dataset.x)?;
    let x = whiten_apply(&w, &dataset.x)?;
    Ok((w, x))
}

/// One model on all rows and all features, after whitening.
pub fn train(
    spec: &ModelSpec,
    dataset: &Dataset,
    target: Target,
    seed: u64,
) -> Result<TrainedPredictor> {
    let (w, x) = whitened(dataset)?;
    let model = Model::fit(spec, &x, dataset.target(target), seed)?;
    let selected = (0..dataset.width()).collect();
    Ok(TrainedPredictor::new(
        target,
        spec.clone(),
        w,
        selected,
        vec![model],
    ))
}

/// `b` bootstrap members on all features, after whitening.
pub fn bagging_train(
    spec: &ModelSpec,
    dataset: &Dataset,
    target: Target,
    b: usize,
    seed: u64,
) -> Result<TrainedPredictor> {
    let (w, x) = whitened(dataset)?;
    let ensemble = bag_models(
        spec,
        &x,
        dataset.target(target),
        b,
        seed,
        Schedule::default(),
    )?;
    let selected = (0..dataset.width()).collect();
    Ok(TrainedPredictor::new(
        target,
        spec.clone(),
        w,
        selected,
        ensemble,
    ))
}
