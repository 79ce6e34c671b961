//! Random forest of CART regression trees. Splits maximize variance
//! reduction over midpoint thresholds; each split inspects ceil(f * d)
//! randomly chosen features.

use crate::error::{Error, Result};
use crate::seeding::{rng_for, RunRng};
use rand::seq::SliceRandom;
use rand::RngExt;

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// None grows trees until purity or the leaf-size floor.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features examined per split, in (0, 1].
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: Some(10),
            min_samples_leaf: 2,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument(
                "min_samples_leaf must be >= 1".into(),
            ));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "feature_fraction must be in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
    input_dim: usize,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
    feature_pool: Vec<usize>,
}

impl<'a> TreeBuilder<'a> {
    /// Best (feature, threshold, split position) over the candidate features,
    /// or None when nothing reduces the variance. `idx` arrives unsorted and
    /// leaves sorted by the winning feature with the split at `pos`.
    fn best_split(&mut self, idx: &mut [usize], rng: &mut RunRng) -> Option<(usize, f64)> {
        let n = idx.len();
        let total_sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total_sum * total_sum / n as f64;

        self.feature_pool.shuffle(rng);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, reduction)
        let mut scratch: Vec<usize> = idx.to_vec();
        for &f in self.feature_pool.iter().take(self.n_candidates) {
            scratch.sort_by(|&a, &b| {
                self.x[a][f]
                    .partial_cmp(&self.x[b][f])
                    .expect("finite features")
            });
            let mut left_sum = 0.0f64;
            let mut left_sq = 0.0f64;
            for pos in 0..n - 1 {
                let yi = self.y[scratch[pos]];
                left_sum += yi;
                left_sq += yi * yi;
                let a = self.x[scratch[pos]][f];
                let b = self.x[scratch[pos + 1]][f];
                if a == b {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / n_left as f64)
                    + (right_sq - right_sum * right_sum / n_right as f64);
                let reduction = parent_sse - sse;
                if reduction > 0.0
                    && best.map_or(true, |(_, _, r)| reduction > r)
                {
                    best = Some((f, (a + b) / 2.0, reduction));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn build(&mut self, idx: &mut Vec<usize>, depth: usize, rng: &mut RunRng) -> usize {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let at_depth_limit = self.max_depth.is_some_and(|d| depth >= d);
        if n < 2 * self.min_leaf || at_depth_limit {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        };
        let (mut left_idx, mut right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][feature] <= threshold);
        // Midpoint rounding can collapse one side; fall back to a leaf.
        if left_idx.len() < self.min_leaf || right_idx.len() < self.min_leaf {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean }); // placeholder
        let left = self.build(&mut left_idx, depth + 1, rng);
        let right = self.build(&mut right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

pub fn forest_fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyInput("forest training data".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("forest feature rows".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forest features".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest targets".into()));
    }

    let n = x.len();
    let n_candidates = ((config.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng = rng_for(config.seed, &format!("tree-{t}"));
        let mut idx: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder {
            x,
            y,
            max_depth: config.max_depth,
            min_leaf: config.min_samples_leaf,
            n_candidates,
            nodes: Vec::new(),
            feature_pool: (0..d).collect(),
        };
        builder.build(&mut idx, 0, &mut rng);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(Forest {
        trees,
        input_dim: d,
    })
}

impl Forest {
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
            / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|row| self.predict_row(row)).collect()
    }
}
