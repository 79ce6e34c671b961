//! Scalar evaluation metrics: R^2, MAE, Kendall tau-b, Spearman rho.

use crate::error::{Error, Result};

fn check_paired(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.is_empty() {
        return Err(Error::EmptyInput("metric inputs".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    Ok(())
}

/// Coefficient of determination, 1 - SS_res / SS_tot. Errors when the true
/// values are constant (SS_tot = 0) because the score is undefined there.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_paired(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget(
            "R^2 is undefined for a constant target".into(),
        ));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mean_absolute_error(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_paired(y_true, y_pred)?;
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).abs())
        .sum::<f64>()
        / y_true.len() as f64)
}

/// Kendall tau-b with tie correction:
/// (C - D) / sqrt((n0 - n1)(n0 - n2)), n0 = n(n-1)/2.
/// A pair tied on either variable counts as neither concordant nor
/// discordant. Errors if either variable is entirely tied.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "kendall tau needs at least 2 pairs".into(),
        ));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                ties_x += 1;
                ties_y += 1;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if dx * dy > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if ties_x == n0 || ties_y == n0 {
        return Err(Error::ConstantTarget(
            "kendall tau is undefined when a variable is constant".into(),
        ));
    }
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    Ok((concordant - discordant) as f64 / denom)
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean of (i+1)..=(j+1)
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantTarget(
            "correlation is undefined when a variable is constant".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rho = Pearson correlation of the average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "spearman rho needs at least 2 pairs".into(),
        ));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use rand::RngExt;

    #[test]
    fn r2_and_mae_on_fixtures() {
        // Five fixtures with hand-computed values.
        let cases: &[(&[f64], &[f64], f64, f64)] = &[
            // perfect fit
            (&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 1.0, 0.0),
            // mean predictor: R^2 = 0
            (&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], 0.0, 2.0 / 3.0),
            // SS_res = 3, SS_tot = 2 -> R^2 = -0.5
            (&[1.0, 2.0, 3.0], &[2.0, 3.0, 2.0], -0.5, 1.0),
            // SS_res = 0.03, SS_tot = 8 -> 1 - 0.00375
            (
                &[1.0, 3.0, 5.0],
                &[1.1, 2.9, 5.1],
                1.0 - 0.03 / 8.0,
                0.1,
            ),
            // constant predictions off the mean: SS_res = 4+0+4 = 8, tot = 8
            (&[0.0, 2.0, 4.0], &[2.0, 2.0, 2.0], 0.0, 4.0 / 3.0),
        ];
        for (yt, yp, r2, mae) in cases {
            assert!((r2_score(yt, yp).unwrap() - r2).abs() < 1e-12);
            assert!((mean_absolute_error(yt, yp).unwrap() - mae).abs() < 1e-12);
        }
        assert_eq!(
            r2_score(&[5.0, 5.0], &[5.0, 5.0]).unwrap_err().code(),
            "CONSTANT_TARGET"
        );
    }

    #[test]
    fn kendall_hand_values() {
        // 3 points, one discordant pair: (C - D)/n0 = (2 - 1)/3.
        let tau = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((tau - 1.0 / 3.0).abs() < 1e-12);
        // Tie in y: C = 2, D = 0, ties_y = 1, n0 = 3
        // tau = 2 / sqrt(3 * 2) = 2/sqrt(6).
        let tau = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0]).unwrap();
        assert!((tau - 2.0 / 6.0f64.sqrt()).abs() < 1e-12);
        // Perfect inversions.
        let tau = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((tau + 1.0).abs() < 1e-12);
        assert!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kendall_matches_independent_oracle() {
        // Oracle: same statistic assembled from explicit pair categories
        // counted with sign() comparisons rather than products.
        let mut rng = rng_for(31, "tau-oracle");
        for case in 0..10 {
            let n = 50 + case * 15; // up to 185 <= 200
            let x: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..20) as f64) * 0.5)
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..20) as f64) * 0.5)
                .collect();
            let mut c = 0i64;
            let mut d = 0i64;
            let mut tx = 0i64;
            let mut ty = 0i64;
            let sign = |a: f64, b: f64| -> i32 {
                if a > b {
                    1
                } else if a < b {
                    -1
                } else {
                    0
                }
            };
            for i in 0..n {
                for j in (i + 1)..n {
                    let sx = sign(x[i], x[j]);
                    let sy = sign(y[i], y[j]);
                    if sx == 0 {
                        tx += 1;
                    }
                    if sy == 0 {
                        ty += 1;
                    }
                    if sx != 0 && sy != 0 {
                        if sx == sy {
                            c += 1;
                        } else {
                            d += 1;
                        }
                    }
                }
            }
            let n0 = (n * (n - 1) / 2) as i64;
            let want =
                (c - d) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt();
            let got = kendall_tau(&x, &y).unwrap();
            assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
        }
    }

    #[test]
    fn ranks_average_over_ties() {
        let ranks = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
        let ranks = average_ranks(&[5.0, 5.0, 5.0]);
        assert_eq!(ranks, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_known_values() {
        // Monotone transform leaves rho at 1.
        let x: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman_rho(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let y_rev: Vec<f64> = x.iter().rev().map(|v| v.exp()).collect();
        assert!((spearman_rho(&x, &y_rev).unwrap() + 1.0).abs() < 1e-12);
        // Textbook tied example against the rank-Pearson definition
        // computed by hand: ranks x = [1.5, 1.5, 3], y = [1, 2, 3].
        let rho = spearman_rho(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((rho - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_rank_invariant() {
        let mut rng = rng_for(32, "rho-invariant");
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rho = spearman_rho(&x, &y).unwrap();
        // Applying a strictly increasing map to x must not change rho.
        let x2: Vec<f64> = x.iter().map(|v| v.powi(3) + 10.0 * v).collect();
        assert!((spearman_rho(&x2, &y).unwrap() - rho).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(r2_score(&[], &[]).is_err());
        assert!(r2_score(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mean_absolute_error(&[1.0], &[f64::INFINITY]).is_err());
        assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
