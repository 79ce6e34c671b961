//! Ridge regression on dense features, solved through the centered normal
//! equations so the intercept stays unregularized.

use crate::error::{Error, Result};
use crate::eval::linalg::{cholesky_solve, dot};

#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|row| self.predict_row(row)).collect()
    }
}

/// Fit w = (Xc^T Xc + lambda I)^-1 Xc^T yc on mean-centered data; the
/// intercept is recovered as mean(y) - w . mean(x).
pub fn ridge_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("ridge design matrix".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("ridge feature rows".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be finite and >= 0, got {lambda}"
        )));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ridge features".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge targets".into()));
    }

    let n = x.len() as f64;
    let mut x_mean = vec![0.0f64; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= n;
    }
    let y_mean = y.iter().sum::<f64>() / n;

    // Gram matrix of the centered design, plus the ridge diagonal.
    let mut a = vec![vec![0.0f64; d]; d];
    let mut b = vec![0.0f64; d];
    for (row, &yv) in x.iter().zip(y) {
        let yc = yv - y_mean;
        for i in 0..d {
            let xi = row[i] - x_mean[i];
            b[i] += xi * yc;
            for j in i..d {
                a[i][j] += xi * (row[j] - x_mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
        a[i][i] += lambda;
    }

    // A singular Gram matrix surfaces as SingularSystem, whose message
    // already tells the caller to raise lambda above zero.
    let weights = cholesky_solve(&a, &b)?;
    let intercept = y_mean - dot(&weights, &x_mean);
    Ok(RidgeModel { weights, intercept })
}
