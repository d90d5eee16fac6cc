use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::check_width;
use crate::{LearnError, Result};

/// Eigenvalues at or below this are treated as zero variance.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Affine map `x -> W (x - mean)` that decorrelates the training features
/// and scales them to unit variance.
///
/// `W = E diag(1/sqrt(l)) E^T` over the eigenpairs `(l, E)` of the sample
/// covariance, so data that is already white maps to itself. Directions with
/// an eigenvalue at or below [`EIGEN_FLOOR`] are projected out.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Whitener {
    pub mean: Vec<f64>,
    /// Row-major `d x d`.
    pub matrix: Vec<Vec<f64>>,
}

impl Whitener {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn identity(d: usize) -> Whitener {
        Whitener {
            mean: vec![0.0; d],
            matrix: (0..d)
                .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
                .collect(),
        }
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.width() {
            return Err(LearnError::WidthMismatch {
                expected: self.width(),
                got: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self
            .matrix
            .iter()
            .map(|row| row.iter().zip(&centered).map(|(w, c)| w * c).sum())
            .collect())
    }
}

/// Sample covariance (divisor `n - 1`) of the rows of `x`.
pub fn covariance(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
    (centered.transpose() * &centered) / (n as f64 - 1.0)
}

pub fn whiten_fit(x: &[Vec<f64>]) -> Result<Whitener> {
    if x.len() < 2 {
        return Err(LearnError::TooFewRows {
            needed: 2,
            got: x.len(),
        });
    }
    let d = x[0].len();
    check_width(x, d)?;
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let eigen = SymmetricEigen::new(covariance(x));
    let scale: Vec<f64> = eigen
        .eigenvalues
        .iter()
        .map(|&l| if l > EIGEN_FLOOR { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    let e = &eigen.eigenvectors;
    let matrix = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).map(|k| e[(i, k)] * scale[k] * e[(j, k)]).sum())
                .collect()
        })
        .collect();
    Ok(Whitener { mean, matrix })
}

pub fn whiten_apply(w: &Whitener, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|r| w.apply_row(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0]).collect();
        let w = whiten_fit(&x).unwrap();
        let out = whiten_apply(&w, &x).unwrap();
        assert!(out.iter().all(|r| r[1] == 0.0 && r[0].is_finite()));
        let cov = covariance(&out);
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn needs_two_rows() {
        assert_eq!(
            whiten_fit(&[vec![1.0]]).unwrap_err(),
            LearnError::TooFewRows { needed: 2, got: 1 }
        );
    }

    #[test]
    fn width_is_checked() {
        let w = Whitener::identity(2);
        assert!(w.apply_row(&[1.0]).is_err());
        assert_eq!(w.apply_row(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }
}
