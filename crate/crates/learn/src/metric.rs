/// Relative-error accuracy `1 - |p - o| / o` of a predicted rate against an
/// observed one. Undefined when nothing was observed.
pub fn prediction_accuracy(predicted: f64, observed: f64) -> Option<f64> {
    (observed > 0.0).then(|| 1.0 - (predicted - observed).abs() / observed)
}

/// Score used to compare models during cross-validation; larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean of [`prediction_accuracy`] over rows where it is defined.
    #[default]
    Accuracy,
    /// Negated mean squared error.
    NegativeMse,
}

impl Metric {
    /// Mean score over the rows of one fold, `None` when undefined for
    /// every row.
    pub fn score(self, predicted: &[f64], observed: &[f64]) -> Option<f64> {
        match self {
            Metric::Accuracy => {
                let acc: Vec<f64> = predicted
                    .iter()
                    .zip(observed)
                    .filter_map(|(&p, &o)| prediction_accuracy(p, o))
                    .collect();
                (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
            }
            Metric::NegativeMse => (!predicted.is_empty()).then(|| {
                -predicted
                    .iter()
                    .zip(observed)
                    .map(|(p, o)| (p - o).powi(2))
                    .sum::<f64>()
                    / predicted.len() as f64
            }),
        }
    }
}
