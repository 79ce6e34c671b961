//! Downstream attribute-prediction protocol: PCA-reduce the embeddings once,
//! then score regression models over repeated reshuffled train/test splits.

use crate::error::{Error, Result};
use crate::eval::forest::{forest_fit, ForestConfig};
use crate::eval::metrics::{kendall_tau, mean_absolute_error, r2_score};
use crate::eval::pca::pca_fit_transform;
use crate::eval::regression::ridge_fit;
use crate::seeding::{derive_seed, rng_for};
use rand::seq::SliceRandom;
use std::collections::HashMap;

/// Attribute table keyed by neighborhood id. `values[row][col]` is NaN when
/// the attribute is missing for that id.
#[derive(Debug, Clone)]
pub struct AttributeTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AttributeTable {
    pub fn new(ids: Vec<String>, names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyInput("attribute columns".into()));
        }
        if ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                got: values.len(),
            });
        }
        for row in &values {
            if row.len() != names.len() {
                return Err(Error::DimensionMismatch {
                    expected: names.len(),
                    got: row.len(),
                });
            }
            // NaN marks a missing entry; infinities are data errors.
            if row.iter().any(|v| v.is_infinite()) {
                return Err(Error::NonFinite("attribute values".into()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(AttributeTable { ids, names, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Forest,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Forest => "forest",
        }
    }
}

pub const METRICS: [&str; 3] = ["r2", "mae", "kendall_tau"];

#[derive(Debug, Clone)]
pub struct DownstreamConfig {
    pub seed: u64,
    pub rounds: usize,
    pub train_frac: f64,
    /// Cap on retained principal components; the effective count is
    /// min(cap, d, N - 1).
    pub pca_components: usize,
    pub min_coverage: usize,
    pub ridge_lambda: f64,
    pub forest: ForestConfig,
    pub models: Vec<ModelKind>,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        DownstreamConfig {
            seed: 0,
            rounds: 20,
            train_frac: 0.85,
            pca_components: 50,
            min_coverage: 20,
            ridge_lambda: 1e-6,
            forest: ForestConfig::default(),
            models: vec![ModelKind::Linear, ModelKind::Forest],
        }
    }
}

impl DownstreamConfig {
    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("rounds must be >= 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_frac must be in (0, 1), got {}",
                self.train_frac
            )));
        }
        if self.pca_components == 0 {
            return Err(Error::InvalidArgument(
                "pca_components must be >= 1".into(),
            ));
        }
        if self.min_coverage < 2 {
            return Err(Error::InvalidArgument(
                "min_coverage must be >= 2".into(),
            ));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one model is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub attribute: String,
    pub model: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct DownstreamReport {
    pub rows: Vec<ReportRow>,
    pub pca_components: usize,
    pub rounds: usize,
}

impl DownstreamReport {
    pub fn mean_of(&self, attribute: &str, model: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.attribute == attribute && r.model == model && r.metric == metric)
            .map(|r| r.mean)
    }
}

fn fit_predict(
    model: ModelKind,
    config: &DownstreamConfig,
    round_seed: u64,
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_test: &[Vec<f64>],
) -> Result<Vec<f64>> {
    match model {
        ModelKind::Linear => {
            let fit = ridge_fit(x_train, y_train, config.ridge_lambda)?;
            Ok(fit.predict(x_test))
        }
        ModelKind::Forest => {
            let forest_config = ForestConfig {
                seed: round_seed,
                ..config.forest.clone()
            };
            let fit = forest_fit(x_train, y_train, &forest_config)?;
            fit.predict(x_test)
        }
    }
}

/// Run the full protocol. Every id in `attrs` must name an embedding row;
/// embedding ids without attribute rows simply contribute no targets.
pub fn downstream_eval(
    ids: &[String],
    embeddings: &[Vec<f64>],
    attrs: &AttributeTable,
    config: &DownstreamConfig,
) -> Result<DownstreamReport> {
    config.validate()?;
    if ids.len() != embeddings.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: embeddings.len(),
        });
    }
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("embeddings".into()));
    }
    let n = embeddings.len();
    let d = embeddings[0].len();
    let index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if index.len() != n {
        return Err(Error::DuplicateId("embedding ids".into()));
    }

    // Targets aligned to embedding rows, NaN where unobserved.
    let n_attrs = attrs.names.len();
    let mut targets = vec![vec![f64::NAN; n]; n_attrs];
    for (row, id) in attrs.ids.iter().enumerate() {
        let Some(&emb_row) = index.get(id.as_str()) else {
            return Err(Error::InvalidArgument(format!(
                "attribute id {id:?} has no embedding"
            )));
        };
        for (a, target) in targets.iter_mut().enumerate() {
            target[emb_row] = attrs.values[row][a];
        }
    }

    let k = config.pca_components.min(d).min(n - 1);
    let (scores, _) = pca_fit_transform(embeddings, k)?;

    // results[attr][model][metric] -> per-round values
    let mut results =
        vec![vec![vec![Vec::with_capacity(config.rounds); METRICS.len()]; config.models.len()]; n_attrs];

    for round in 0..config.rounds {
        let label = format!("eval-reshuffle-{round}");
        let mut rng = rng_for(config.seed, &label);
        let round_seed = derive_seed(config.seed, &label);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);

        for (a, target) in targets.iter().enumerate() {
            let valid: Vec<usize> = perm
                .iter()
                .copied()
                .filter(|&i| target[i].is_finite())
                .collect();
            if valid.len() < config.min_coverage {
                return Err(Error::InsufficientData(format!(
                    "attribute {:?} has {} observed values; need at least {}",
                    attrs.names[a],
                    valid.len(),
                    config.min_coverage
                )));
            }
            let n_train = ((config.train_frac * valid.len() as f64).floor() as usize)
                .clamp(1, valid.len() - 1);
            let (train_rows, test_rows) = valid.split_at(n_train);
            let x_train: Vec<Vec<f64>> =
                train_rows.iter().map(|&i| scores[i].clone()).collect();
            let y_train: Vec<f64> = train_rows.iter().map(|&i| target[i]).collect();
            let x_test: Vec<Vec<f64>> =
                test_rows.iter().map(|&i| scores[i].clone()).collect();
            let y_test: Vec<f64> = test_rows.iter().map(|&i| target[i]).collect();

            for (m, &model) in config.models.iter().enumerate() {
                let pred = fit_predict(model, config, round_seed, &x_train, &y_train, &x_test)?;
                results[a][m][0].push(r2_score(&y_test, &pred)?);
                results[a][m][1].push(mean_absolute_error(&y_test, &pred)?);
                results[a][m][2].push(kendall_tau(&y_test, &pred)?);
            }
        }
    }

    let mut rows = Vec::with_capacity(n_attrs * config.models.len() * METRICS.len());
    for (a, name) in attrs.names.iter().enumerate() {
        for (m, model) in config.models.iter().enumerate() {
            for (metric_idx, metric) in METRICS.iter().enumerate() {
                let values = &results[a][m][metric_idx];
                let mean = crate::eval::linalg::mean(values);
                let std = crate::eval::linalg::sample_std(values);
                rows.push(ReportRow {
                    attribute: name.clone(),
                    model: model.name().to_string(),
                    metric: metric.to_string(),
                    mean,
                    std,
                });
            }
        }
    }
    Ok(DownstreamReport {
        rows,
        pca_components: k,
        rounds: config.rounds,
    })
}
