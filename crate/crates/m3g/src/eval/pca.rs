//! Principal-component reduction of the embedding matrix via an
//! eigendecomposition of the d x d sample covariance.

use crate::error::{Error, Result};
use crate::eval::linalg::{dot, sym_eigen};

/// Fitted PCA basis. `components[i]` is the i-th principal axis (length d);
/// sign convention: each component's largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalues for the kept components, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue share of the total covariance trace.
    pub explained_ratio: Vec<f64>,
}

impl Pca {
    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }
}

/// Mean-center `x` (N rows of dimension d) and project onto the top-k
/// covariance eigenvectors. Returns the N x k score matrix and the basis.
pub fn pca_fit_transform(x: &[Vec<f64>], k: usize) -> Result<(Vec<Vec<f64>>, Pca)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "PCA needs at least 2 rows".into(),
        ));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("PCA input rows".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA input".into()));
        }
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::KTooLarge { k, n: n.min(d) });
    }

    let mut mean = vec![0.0f64; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Sample covariance (ddof = 1).
    let mut cov = vec![vec![0.0f64; d]; d];
    for row in &centered {
        for i in 0..d {
            let ri = row[i];
            for j in i..d {
                cov[i][j] += ri * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();

    let (values, vectors) = sym_eigen(&cov)?;
    let mut components: Vec<Vec<f64>> = vectors.into_iter().take(k).collect();
    let eigenvalues: Vec<f64> = values.iter().take(k).copied().collect();
    for comp in &mut components {
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).expect("finite"))
            .map(|(i, _)| i)
            .expect("non-empty component");
        if comp[lead] < 0.0 {
            for v in comp.iter_mut() {
                *v = -*v;
            }
        }
    }
    let explained_ratio: Vec<f64> = if trace > 0.0 {
        eigenvalues.iter().map(|l| l / trace).collect()
    } else {
        vec![0.0; k]
    };

    let scores: Vec<Vec<f64>> = centered
        .iter()
        .map(|row| components.iter().map(|c| dot(c, row)).collect())
        .collect();
    Ok((
        scores,
        Pca {
            mean,
            components,
            eigenvalues,
            explained_ratio,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use rand::RngExt;

    fn random_matrix(n: usize, d: usize, seed_label: &str) -> Vec<Vec<f64>> {
        let mut rng = rng_for(211, seed_label);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn collinear_data_explained_by_one_component() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64])
            .collect();
        let (_, pca) = pca_fit_transform(&x, 1).unwrap();
        assert!((pca.explained_ratio[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_rank_reconstruction() {
        let x = random_matrix(20, 4, "pca-recon");
        let (scores, pca) = pca_fit_transform(&x, 4).unwrap();
        for (row, score) in x.iter().zip(&scores) {
            for i in 0..4 {
                let recon: f64 = pca.mean[i]
                    + (0..4).map(|c| score[c] * pca.components[c][i]).sum::<f64>();
                assert!((recon - row[i]).abs() < 1e-8, "{recon} vs {}", row[i]);
            }
        }
    }

    #[test]
    fn eigenvalues_match_library_oracle() {
        let x = random_matrix(50, 10, "pca-oracle");
        let (_, pca) = pca_fit_transform(&x, 10).unwrap();
        // Oracle: dense symmetric eigensolve of the sample covariance.
        let n = x.len();
        let d = 10;
        let mut mean = vec![0.0; d];
        for row in &x {
            for i in 0..d {
                mean[i] += row[i];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = nalgebra::DMatrix::zeros(d, d);
        for row in &x {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        cov /= (n - 1) as f64;
        let mut oracle = cov.symmetric_eigen().eigenvalues.as_slice().to_vec();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in pca.eigenvalues.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn score_columns_orthogonal_with_eigenvalue_variances() {
        let x = random_matrix(60, 6, "pca-orth");
        let (scores, pca) = pca_fit_transform(&x, 6).unwrap();
        let n = scores.len();
        for a in 0..6 {
            for b in 0..6 {
                let gram: f64 = scores.iter().map(|s| s[a] * s[b]).sum();
                if a == b {
                    // Scores are centered, so Gram/(n-1) is the variance.
                    let var = gram / (n - 1) as f64;
                    assert!((var - pca.eigenvalues[a]).abs() < 1e-8);
                } else {
                    assert!(gram.abs() < 1e-8, "off-diagonal Gram {gram}");
                }
            }
        }
    }

    #[test]
    fn sign_convention_makes_leading_entry_positive() {
        let x = random_matrix(30, 5, "pca-sign");
        let (_, pca) = pca_fit_transform(&x, 5).unwrap();
        for comp in &pca.components {
            let lead = comp
                .iter()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { *v } else { acc });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn k_bounds_enforced() {
        let x = random_matrix(5, 3, "pca-k");
        assert_eq!(
            pca_fit_transform(&x, 4).unwrap_err().code(),
            "K_TOO_LARGE"
        );
        assert_eq!(pca_fit_transform(&x, 0).unwrap_err().code(), "K_TOO_LARGE");
        assert!(pca_fit_transform(&x[..1], 1).is_err());
    }

    #[test]
    fn transform_row_matches_fit_scores() {
        let x = random_matrix(12, 4, "pca-transform");
        let (scores, pca) = pca_fit_transform(&x, 3).unwrap();
        for (row, score) in x.iter().zip(&scores) {
            let t = pca.transform_row(row);
            for (a, b) in t.iter().zip(score) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
