use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{LearnError, Result};

/// Linear model `y = intercept + coefficients . x` fitted by ridge
/// regression on centered data; the intercept is not penalized.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ridge {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Relative eigenvalue threshold below which an unregularized system is
/// considered singular.
const SINGULAR_RATIO: f64 = 1e-12;

impl Ridge {
    pub fn fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Ridge> {
        let n = x.len();
        let d = x[0].len();
        let x_mean: Vec<f64> = (0..d)
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = xc.transpose() * &xc;
        if lambda == 0.0 {
            let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
            let max = eig.max();
            if eig.min() <= SINGULAR_RATIO * max || max <= 0.0 {
                return Err(LearnError::Singular);
            }
        }
        let a = gram + DMatrix::identity(d, d) * lambda;
        let b = xc.transpose() * yc;
        let w = match a.clone().cholesky() {
            Some(c) => c.solve(&b),
            None => a.lu().solve(&b).ok_or(LearnError::Singular)?,
        };
        let intercept = y_mean - w.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
        Ok(Ridge {
            intercept,
            coefficients: w.iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}
