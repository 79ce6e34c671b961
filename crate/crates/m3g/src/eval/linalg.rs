//! Dense symmetric linear algebra for the evaluation stack: a cyclic Jacobi
//! eigensolver and a Cholesky solver for small SPD systems. Matrices are
//! row-major `Vec<Vec<f64>>`; everything here is deterministic.

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvectors
/// (each `vectors[i]` is the unit eigenvector for `values[i]`).
pub fn sym_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "eigensolver needs a non-empty square matrix".into(),
        ));
    }
    for i in 0..n {
        for j in 0..n {
            if !a[i][j].is_finite() {
                return Err(Error::NonFinite("eigensolver input".into()));
            }
            if (a[i][j] - a[j][i]).abs() > 1e-9 * (1.0 + a[i][j].abs()) {
                return Err(Error::InvalidArgument(format!(
                    "matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    // Symmetrize exactly so rotations stay consistent.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = avg;
            m[j][i] = avg;
        }
    }
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = m
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[i][j].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= tol {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    Ok((values, vectors))
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
/// A non-positive pivot reports the system as singular.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) || b.len() != n {
        return Err(Error::InvalidArgument(
            "cholesky needs a square matrix and a matching right-hand side".into(),
        ));
    }
    // Lower-triangular factor L with A = L L^T.
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularSystem);
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (ddof = 1); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use rand::RngExt;

    fn random_symmetric(n: usize, rng: &mut crate::seeding::RunRng) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let x = rng.random_range(-2.0..2.0);
                a[i][j] = x;
                a[j][i] = x;
            }
        }
        a
    }

    #[test]
    fn eigen_diagonal_matrix_is_identity_decomposition() {
        let a = vec![vec![3.0, 0.0], vec![0.0, 1.0]];
        let (values, vectors) = sym_eigen(&a).unwrap();
        assert!((values[0] - 3.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        assert!((vectors[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((vectors[1][1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_known_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (values, vectors) = sym_eigen(&a).unwrap();
        assert!((values[0] - 3.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        // Eigenvector for 3 is (1,1)/sqrt(2) up to sign.
        let r = vectors[0][0] / vectors[0][1];
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigen_matches_library_oracle_on_random_matrices() {
        let mut rng = rng_for(201, "linalg-eigen-oracle");
        for _ in 0..10 {
            let n = rng.random_range(2..9);
            let a = random_symmetric(n, &mut rng);
            let (values, vectors) = sym_eigen(&a).unwrap();
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
            let mut oracle = na.symmetric_eigen().eigenvalues.as_slice().to_vec();
            oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (got, want) in values.iter().zip(&oracle) {
                assert!((got - want).abs() < 1e-10, "{got} vs {want}");
            }
            // Residual check: A v = lambda v.
            for (lambda, vec) in values.iter().zip(&vectors) {
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| a[i][j] * vec[j]).sum();
                    assert!((av - lambda * vec[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn eigen_rejects_asymmetric_input() {
        let a = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert!(sym_eigen(&a).is_err());
    }

    #[test]
    fn cholesky_solves_spd_systems_against_elimination_oracle() {
        let mut rng = rng_for(203, "linalg-chol-oracle");
        for _ in 0..10 {
            let n = rng.random_range(1..8);
            // SPD by construction: B B^T + I.
            let b = random_symmetric(n, &mut rng);
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
                }
                a[i][i] += 1.0;
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = cholesky_solve(&a, &rhs).unwrap();
            let oracle = gaussian_elimination(&a, &rhs);
            for (got, want) in x.iter().zip(&oracle) {
                assert!((got - want).abs() < 1e-8, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn cholesky_reports_singular_systems() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(
            cholesky_solve(&a, &[1.0, 1.0]).unwrap_err().code(),
            "SINGULAR_SYSTEM"
        );
    }

    /// Independent dense solver: partial-pivot Gaussian elimination.
    fn gaussian_elimination(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut aug: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut r = row.clone();
                r.push(bi);
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            for row in (col + 1)..n {
                let factor = aug[row][col] / aug[col][col];
                for k in col..=n {
                    aug[row][k] -= factor * aug[col][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut sum = aug[row][n];
            for k in (row + 1)..n {
                sum -= aug[row][k] * x[k];
            }
            x[row] = sum / aug[row][row];
        }
        x
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[5.0]), 0.0);
        // Sample std of {2, 4}: sqrt(((2-3)^2 + (4-3)^2) / 1) = sqrt(2).
        assert!((sample_std(&[2.0, 4.0]) - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(l2_distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }
}
