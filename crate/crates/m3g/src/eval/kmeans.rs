//! K-means clustering: k-means++ seeding followed by Lloyd iterations.

use crate::error::{Error, Result};
use crate::eval::linalg::l2_distance;
use crate::seeding::RunRng;
use rand::RngExt;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step; non-increasing by construction.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = l2_distance(centroid, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// k-means++: first center uniform, later centers proportional to the
/// squared distance to the nearest already-chosen center.
fn plus_plus_init(x: &[Vec<f64>], k: usize, rng: &mut RunRng) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(x[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = x
        .iter()
        .map(|p| {
            let d = l2_distance(&centroids[0], p);
            d * d
        })
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if r < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with a center; any choice is equivalent.
            rng.random_range(0..n)
        };
        centroids.push(x[next].clone());
        for (i, p) in x.iter().enumerate() {
            let d = l2_distance(centroids.last().expect("just pushed"), p);
            d2[i] = d2[i].min(d * d);
        }
    }
    centroids
}

pub fn kmeans(x: &[Vec<f64>], k: usize, rng: &mut RunRng) -> Result<KmeansResult> {
    if x.is_empty() {
        return Err(Error::EmptyInput("k-means points".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > x.len() {
        return Err(Error::KTooLarge { k, n: x.len() });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("k-means points".into()));
        }
    }

    let n = x.len();
    let mut centroids = plus_plus_init(x, k, rng);
    let mut labels = vec![0usize; n];
    let mut inertia_history = Vec::new();
    let mut iterations = 0usize;

    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0f64;
        for (i, p) in x.iter().enumerate() {
            let (c, dist) = nearest(&centroids, p);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            inertia += dist * dist;
        }
        inertia_history.push(inertia);
        if !changed && inertia_history.len() > 1 {
            break;
        }

        let mut sums = vec![vec![0.0f64; d]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in x.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }
        // Reseed any empty cluster onto the point farthest from its
        // currently assigned centroid; this never increases inertia.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = l2_distance(&centroids[labels[a]], &x[a]);
                        let db = l2_distance(&centroids[labels[b]], &x[b]);
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("non-empty input");
                centroids[c] = x[far].clone();
            }
        }
    }

    let inertia = *inertia_history.last().expect("at least one iteration");
    Ok(KmeansResult {
        labels,
        centroids,
        inertia,
        inertia_history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;

    fn blob(center: &[f64], count: usize, spread: f64, rng: &mut RunRng) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + rng.random_range(-spread..spread))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn recovers_well_separated_blobs() {
        // Blob spread 0.5, centers 50 apart: 10 sigma separation and more.
        let mut rng = rng_for(51, "kmeans-blobs");
        let centers = [vec![0.0, 0.0], vec![50.0, 0.0], vec![0.0, 50.0]];
        let mut x = Vec::new();
        let mut truth = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            let pts = blob(c, 30, 0.5, &mut rng);
            truth.extend(std::iter::repeat(label).take(pts.len()));
            x.extend(pts);
        }
        let mut rng = rng_for(51, "kmeans-run");
        let result = kmeans(&x, 3, &mut rng).unwrap();
        // Same-truth pairs share a label, cross-truth pairs never do.
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                assert_eq!(
                    truth[i] == truth[j],
                    result.labels[i] == result.labels[j],
                    "pair ({i}, {j})"
                );
            }
        }
        // Each found centroid sits within the spread of a true center.
        for c in &result.centroids {
            let min_d = centers
                .iter()
                .map(|t| l2_distance(t, c))
                .fold(f64::INFINITY, f64::min);
            assert!(min_d < 0.5, "centroid {c:?} is {min_d} from any center");
        }
    }

    #[test]
    fn inertia_history_is_monotone_over_many_runs() {
        for run in 0..50 {
            let mut rng = rng_for(52, &format!("kmeans-mono-{run}"));
            let x: Vec<Vec<f64>> = (0..80)
                .map(|_| {
                    (0..4)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let result = kmeans(&x, 5, &mut rng).unwrap();
            for w in result.inertia_history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "run {run}: inertia rose {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, -(i as f64)]).collect();
        let mut rng = rng_for(53, "kmeans-kn");
        let result = kmeans(&x, 6, &mut rng).unwrap();
        assert!(result.inertia < 1e-18);
        let mut sorted = result.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn k_above_n_is_an_error() {
        let x = vec![vec![0.0], vec![1.0]];
        let mut rng = rng_for(54, "kmeans-ktoolarge");
        assert_eq!(
            kmeans(&x, 3, &mut rng).unwrap_err().code(),
            "K_TOO_LARGE"
        );
    }

    #[test]
    fn duplicate_points_with_k_above_distinct_count_still_terminate() {
        // Only 2 distinct locations but k = 3: some cluster must go empty
        // and get reseeded; the run must still converge with valid labels.
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![9.0, 9.0],
            vec![9.0, 9.0],
        ];
        let mut rng = rng_for(55, "kmeans-dup");
        let result = kmeans(&x, 3, &mut rng).unwrap();
        assert_eq!(result.labels.len(), 5);
        assert!(result.labels.iter().all(|&l| l < 3));
        for w in result.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn deterministic_per_rng_stream() {
        let mut rng = rng_for(56, "kmeans-data");
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let mut r1 = rng_for(57, "kmeans-det");
        let mut r2 = rng_for(57, "kmeans-det");
        let a = kmeans(&x, 4, &mut r1).unwrap();
        let b = kmeans(&x, 4, &mut r2).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }

    #[test]
    fn plus_plus_prefers_distant_points() {
        // With one far outlier, the second seed should almost always be it.
        let mut x = vec![vec![0.0]; 20];
        x.push(vec![1000.0]);
        let mut hits = 0;
        for i in 0..50 {
            let mut rng = rng_for(58, &format!("kmeans-pp-{i}"));
            let centroids = plus_plus_init(&x, 2, &mut rng);
            if centroids.iter().any(|c| c[0] == 1000.0) {
                hits += 1;
            }
        }
        assert!(hits >= 49, "outlier chosen only {hits}/50 times");
    }
}
