//! Key-value config text: `key = value` lines, `#` comments, blank lines.
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use crate::error::{Error, Result};
use crate::eval::downstream::{DownstreamConfig, ModelKind};
use crate::eval::forest::ForestConfig;
use crate::geo::Modality;
use crate::graph::ThresholdFn;
use crate::synth::SynthConfig;
use crate::trainer::{StageValues, TrainConfig};
use std::collections::BTreeMap;

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?}",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

/// Consumes keys out of a parsed map so leftovers can be flagged.
struct Kv {
    entries: BTreeMap<String, String>,
}

impl Kv {
    fn parse(text: &str) -> Result<Self> {
        Ok(Kv {
            entries: parse_kv(text)?,
        })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<T>().map_err(|_| {
                Error::Config(format!("key {key:?}: cannot parse value {raw:?}"))
            }),
        }
    }

    fn finish(self, context: &str) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!(
                "unknown {context} key {key:?}"
            )));
        }
        Ok(())
    }
}

/// Comma-separated modality list, case-insensitive, order-preserving.
pub fn parse_edge_list(raw: &str) -> Result<Vec<Modality>> {
    let mut out: Vec<Modality> = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let modality = Modality::new(part.to_uppercase());
        if !out.contains(&modality) {
            out.push(modality);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no edge modalities in {raw:?}")));
    }
    Ok(out)
}

pub fn synth_config_from_text(text: &str) -> Result<SynthConfig> {
    let mut kv = Kv::parse(text)?;
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        cities: kv.take_parsed("cities", defaults.cities)?,
        neighborhoods: kv.take_parsed("neighborhoods", defaults.neighborhoods)?,
        communities: kv.take_parsed("communities", defaults.communities)?,
        d_feat: kv.take_parsed("d_feat", defaults.d_feat)?,
        vocab: kv.take_parsed("vocab", defaults.vocab)?,
        sv_per_neighborhood: kv
            .take_parsed("sv_per_neighborhood", defaults.sv_per_neighborhood)?,
        tokens_per_neighborhood: kv
            .take_parsed("tokens_per_neighborhood", defaults.tokens_per_neighborhood)?,
        trip_scale: kv.take_parsed("trip_scale", defaults.trip_scale)?,
        community_affinity: kv
            .take_parsed("community_affinity", defaults.community_affinity)?,
        sv_noise: kv.take_parsed("sv_noise", defaults.sv_noise)?,
        attr_noise: kv.take_parsed("attr_noise", defaults.attr_noise)?,
        seed: kv.take_parsed("seed", defaults.seed)?,
    };
    kv.finish("synth config")?;
    config.validate()?;
    Ok(config)
}

/// The config as `key = value` pairs. Rendering them one per line and
/// feeding the result back through [`synth_config_from_text`] reproduces
/// the config, so a manifest's `config.*` entries double as a config file.
pub fn synth_config_kv(config: &SynthConfig) -> Vec<(String, String)> {
    vec![
        ("cities".into(), config.cities.to_string()),
        ("neighborhoods".into(), config.neighborhoods.to_string()),
        ("communities".into(), config.communities.to_string()),
        ("d_feat".into(), config.d_feat.to_string()),
        ("vocab".into(), config.vocab.to_string()),
        (
            "sv_per_neighborhood".into(),
            config.sv_per_neighborhood.to_string(),
        ),
        (
            "tokens_per_neighborhood".into(),
            config.tokens_per_neighborhood.to_string(),
        ),
        ("trip_scale".into(), config.trip_scale.to_string()),
        (
            "community_affinity".into(),
            config.community_affinity.to_string(),
        ),
        ("sv_noise".into(), config.sv_noise.to_string()),
        ("attr_noise".into(), config.attr_noise.to_string()),
        ("seed".into(), config.seed.to_string()),
    ]
}

/// As [`synth_config_kv`], for the trainer. Every threshold in the map is
/// rendered, so re-parsing restores it on top of the defaults.
pub fn train_config_kv(config: &TrainConfig) -> Vec<(String, String)> {
    let mut out = vec![
        ("d".into(), config.d.to_string()),
        ("margin".into(), config.margin.to_string()),
        ("init_scale".into(), config.init_scale.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("lr_sv".into(), config.lr.sv.to_string()),
        ("lr_poi".into(), config.lr.poi.to_string()),
        ("lr_edge".into(), config.lr.edge.to_string()),
        ("epochs_sv".into(), config.epochs.sv.to_string()),
        ("epochs_poi".into(), config.epochs.poi.to_string()),
        ("epochs_edge".into(), config.epochs.edge.to_string()),
        (
            "triplets_per_kind".into(),
            config.triplets_per_kind.to_string(),
        ),
        (
            "edges".into(),
            config
                .edge_modalities
                .iter()
                .map(|m| m.as_str())
                .collect::<Vec<_>>()
                .join(","),
        ),
    ];
    for (modality, func) in &config.thresholds {
        out.push((
            format!("threshold_{}", modality.as_str().to_lowercase()),
            func.to_string(),
        ));
    }
    out
}

pub fn train_config_from_text(text: &str) -> Result<TrainConfig> {
    let mut kv = Kv::parse(text)?;
    let defaults = TrainConfig::default();
    let edge_modalities = match kv.take("edges") {
        None => defaults.edge_modalities.clone(),
        Some(raw) => parse_edge_list(&raw)?,
    };
    let mut config = TrainConfig {
        d: kv.take_parsed("d", defaults.d)?,
        margin: kv.take_parsed("margin", defaults.margin)?,
        init_scale: kv.take_parsed("init_scale", defaults.init_scale)?,
        seed: kv.take_parsed("seed", defaults.seed)?,
        lr: StageValues {
            sv: kv.take_parsed("lr_sv", defaults.lr.sv)?,
            poi: kv.take_parsed("lr_poi", defaults.lr.poi)?,
            edge: kv.take_parsed("lr_edge", defaults.lr.edge)?,
        },
        epochs: StageValues {
            sv: kv.take_parsed("epochs_sv", defaults.epochs.sv)?,
            poi: kv.take_parsed("epochs_poi", defaults.epochs.poi)?,
            edge: kv.take_parsed("epochs_edge", defaults.epochs.edge)?,
        },
        triplets_per_kind: kv
            .take_parsed("triplets_per_kind", defaults.triplets_per_kind)?,
        edge_modalities,
        thresholds: defaults.thresholds.clone(),
    };
    // Any `threshold_<modality>` key overrides that layer's sampler, e.g.
    // `threshold_dist = TOP_K:10` or `threshold_mob = STEP:2`.
    let threshold_keys: Vec<String> = kv
        .entries
        .keys()
        .filter(|k| k.starts_with("threshold_"))
        .cloned()
        .collect();
    for key in threshold_keys {
        let raw = kv.take(&key).expect("key listed above");
        let modality = Modality::new(key["threshold_".len()..].to_uppercase());
        let func = ThresholdFn::parse(&raw)?;
        config.thresholds.insert(modality, func);
    }
    kv.finish("train config")?;
    config.validate()?;
    Ok(config)
}

/// Full evaluation settings: the downstream protocol plus clustering and
/// proximity knobs.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub downstream: DownstreamConfig,
    /// k for the cluster-label export.
    pub clusters: usize,
    /// Fraction of unordered pairs probed per modality.
    pub sample_frac: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            downstream: DownstreamConfig::default(),
            clusters: 6,
            sample_frac: 0.05,
        }
    }
}

/// As [`synth_config_kv`], for the evaluation settings. An unbounded forest
/// depth renders as 0, matching the parser's convention.
pub fn eval_settings_kv(settings: &EvalSettings) -> Vec<(String, String)> {
    let dd = &settings.downstream;
    vec![
        ("seed".into(), dd.seed.to_string()),
        ("rounds".into(), dd.rounds.to_string()),
        ("train_frac".into(), dd.train_frac.to_string()),
        ("pca_components".into(), dd.pca_components.to_string()),
        ("min_coverage".into(), dd.min_coverage.to_string()),
        ("ridge_lambda".into(), dd.ridge_lambda.to_string()),
        ("forest_trees".into(), dd.forest.n_trees.to_string()),
        (
            "forest_depth".into(),
            dd.forest.max_depth.unwrap_or(0).to_string(),
        ),
        (
            "forest_min_leaf".into(),
            dd.forest.min_samples_leaf.to_string(),
        ),
        (
            "forest_feature_fraction".into(),
            dd.forest.feature_fraction.to_string(),
        ),
        (
            "models".into(),
            dd.models
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("clusters".into(), settings.clusters.to_string()),
        ("sample_frac".into(), settings.sample_frac.to_string()),
    ]
}

pub fn eval_settings_from_text(text: &str) -> Result<EvalSettings> {
    let mut kv = Kv::parse(text)?;
    let defaults = EvalSettings::default();
    let dd = defaults.downstream;
    let forest_depth = kv.take_parsed(
        "forest_depth",
        dd.forest.max_depth.expect("default depth is bounded"),
    )?;
    let models = match kv.take("models") {
        None => dd.models.clone(),
        Some(raw) => {
            let mut out = Vec::new();
            for part in raw.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let model = match part.to_lowercase().as_str() {
                    "linear" => ModelKind::Linear,
                    "forest" => ModelKind::Forest,
                    other => {
                        return Err(Error::Config(format!("unknown model {other:?}")))
                    }
                };
                if !out.contains(&model) {
                    out.push(model);
                }
            }
            if out.is_empty() {
                return Err(Error::Config(format!("no models in {raw:?}")));
            }
            out
        }
    };
    let settings = EvalSettings {
        downstream: DownstreamConfig {
            seed: kv.take_parsed("seed", dd.seed)?,
            rounds: kv.take_parsed("rounds", dd.rounds)?,
            train_frac: kv.take_parsed("train_frac", dd.train_frac)?,
            pca_components: kv.take_parsed("pca_components", dd.pca_components)?,
            min_coverage: kv.take_parsed("min_coverage", dd.min_coverage)?,
            ridge_lambda: kv.take_parsed("ridge_lambda", dd.ridge_lambda)?,
            forest: ForestConfig {
                n_trees: kv.take_parsed("forest_trees", dd.forest.n_trees)?,
                // 0 means unbounded depth.
                max_depth: if forest_depth == 0 {
                    None
                } else {
                    Some(forest_depth)
                },
                min_samples_leaf: kv
                    .take_parsed("forest_min_leaf", dd.forest.min_samples_leaf)?,
                feature_fraction: kv
                    .take_parsed("forest_feature_fraction", dd.forest.feature_fraction)?,
                bootstrap: dd.forest.bootstrap,
                seed: dd.forest.seed,
            },
            models,
        },
        clusters: kv.take_parsed("clusters", defaults.clusters)?,
        sample_frac: kv.take_parsed("sample_frac", defaults.sample_frac)?,
    };
    kv.finish("eval config")?;
    if settings.clusters == 0 {
        return Err(Error::Config("clusters must be >= 1".into()));
    }
    Ok(settings)
}
