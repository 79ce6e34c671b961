//! Contrastive triplet losses with analytic gradients and the sequential
//! three-stage SGD schedule (street view, then POI words, then graph edges).
//!
//! All three stages share one hinge:
//!
//! `L = max(0, M + ||z_a - e_c|| - ||z_a - e_n||)`
//!
//! where `e_c`/`e_n` come from the feature encoder (SV), the word table
//! (POI), or the embedding table itself (EDGE). Updates are per-triplet SGD
//! with a constant per-stage learning rate.

use crate::encoder::{EmbeddingTable, FeatureEncoder, WordEncoder};
use crate::error::{Error, Result};
use crate::geo::Modality;
use crate::graph::{Multigraph, ThresholdFn};
use crate::sampler::{make_epoch_schedule, InterSampler, IntraSampler, Triplet, TripletKind};
use crate::seeding::{derive_seed, rng_for};
use std::collections::BTreeMap;

/// Per-stage scalar knobs, in fixed stage order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageValues<T> {
    pub sv: T,
    pub poi: T,
    pub edge: T,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Embedding dimension shared by every encoder output.
    pub d: usize,
    pub margin: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub lr: StageValues<f64>,
    pub epochs: StageValues<usize>,
    /// Triplets drawn per kind per epoch (balanced across kinds).
    pub triplets_per_kind: usize,
    /// Edge layers trained in stage 3, interleaved within each epoch.
    pub edge_modalities: Vec<Modality>,
    pub thresholds: BTreeMap<Modality, ThresholdFn>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mut thresholds = BTreeMap::new();
        thresholds.insert(Modality::dist(), ThresholdFn::TopK(5));
        thresholds.insert(Modality::mob(), ThresholdFn::Identity);
        TrainConfig {
            d: 200,
            margin: 1.0,
            init_scale: 0.1,
            seed: 0,
            lr: StageValues {
                sv: 0.01,
                poi: 0.01,
                edge: 0.05,
            },
            epochs: StageValues {
                sv: 50,
                poi: 50,
                edge: 50,
            },
            triplets_per_kind: 1000,
            edge_modalities: vec![Modality::dist(), Modality::mob()],
            thresholds,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "margin must be a positive finite real, got {}",
                self.margin
            )));
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return Err(Error::InvalidArgument("init scale must be positive".into()));
        }
        for lr in [self.lr.sv, self.lr.poi, self.lr.edge] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "learning rates must be positive finite reals, got {lr}"
                )));
            }
        }
        if self.triplets_per_kind == 0 {
            return Err(Error::InvalidArgument(
                "triplets per kind must be positive".into(),
            ));
        }
        if self.epochs.edge > 0 && self.edge_modalities.is_empty() {
            return Err(Error::InvalidArgument(
                "edge stage has epochs but no edge modalities configured".into(),
            ));
        }
        Ok(())
    }

    /// Threshold function for a modality; unconfigured layers sample
    /// proportionally to their weights.
    pub fn threshold_for(&self, modality: &Modality) -> ThresholdFn {
        self.thresholds
            .get(modality)
            .copied()
            .unwrap_or(ThresholdFn::Identity)
    }
}

/// Immutable training data, already resolved to indices: `features[i]` is
/// street-view point `i`'s vector; `sv_items[a]` / `token_items[a]` are
/// neighborhood `a`'s point indices / word-table row ids.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub graph: &'a Multigraph,
    pub features: &'a [Vec<f64>],
    pub sv_items: &'a [Vec<usize>],
    pub token_items: &'a [Vec<usize>],
}

/// All trainable parameters plus run bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub embeddings: EmbeddingTable,
    pub feature_encoder: Option<FeatureEncoder>,
    pub word_encoder: Option<WordEncoder>,
    /// Active-hinge steps skipped at a zero-distance kink.
    pub skipped_degenerate: usize,
    pub history: Vec<EpochStats>,
}

/// One loss-history row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub kind: TripletKind,
    pub mean_loss: f64,
    pub active_fraction: f64,
}

fn check_same_dim(za: &[f64], ec: &[f64], en: &[f64]) -> Result<()> {
    if za.len() != ec.len() || za.len() != en.len() {
        return Err(Error::DimensionMismatch {
            expected: za.len(),
            got: if ec.len() != za.len() { ec.len() } else { en.len() },
        });
    }
    Ok(())
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `max(0, M + ||za - ec|| - ||za - en||)`.
pub fn triplet_loss(za: &[f64], ec: &[f64], en: &[f64], margin: f64) -> Result<f64> {
    check_same_dim(za, ec, en)?;
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "margin must be a positive finite real, got {margin}"
        )));
    }
    Ok((margin + l2_distance(za, ec) - l2_distance(za, en)).max(0.0))
}

/// Gradients of [`triplet_loss`] with respect to the three vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum TripletGrads {
    /// Hinge inactive: all gradients zero.
    Inactive,
    /// Hinge active but an anchor distance is zero; the kink subgradient 0
    /// is chosen and the step should be skipped and counted.
    Degenerate,
    Active {
        g_za: Vec<f64>,
        g_ec: Vec<f64>,
        g_en: Vec<f64>,
    },
}

pub fn triplet_grads(za: &[f64], ec: &[f64], en: &[f64], margin: f64) -> Result<TripletGrads> {
    let loss = triplet_loss(za, ec, en, margin)?;
    if loss <= 0.0 {
        return Ok(TripletGrads::Inactive);
    }
    let dc = l2_distance(za, ec);
    let dn = l2_distance(za, en);
    if dc == 0.0 || dn == 0.0 {
        return Ok(TripletGrads::Degenerate);
    }
    let d = za.len();
    let mut g_za = vec![0.0; d];
    let mut g_ec = vec![0.0; d];
    let mut g_en = vec![0.0; d];
    for i in 0..d {
        let uc = (za[i] - ec[i]) / dc;
        let un = (za[i] - en[i]) / dn;
        g_za[i] = uc - un;
        g_ec[i] = -uc;
        g_en[i] = un;
    }
    Ok(TripletGrads::Active { g_za, g_ec, g_en })
}

/// What a single SGD step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Applied { loss: f64 },
    Inactive,
    SkippedDegenerate { loss: f64 },
}

impl StepOutcome {
    pub fn loss(&self) -> f64 {
        match *self {
            StepOutcome::Applied { loss } | StepOutcome::SkippedDegenerate { loss } => loss,
            StepOutcome::Inactive => 0.0,
        }
    }

    pub fn active(&self) -> bool {
        !matches!(self, StepOutcome::Inactive)
    }
}

fn ensure_finite(grads: &[&[f64]], what: &TripletKind, anchor: usize) -> Result<()> {
    for g in grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient for {what} triplet at anchor {anchor}"
            )));
        }
    }
    Ok(())
}

fn axpy(target: &mut [f64], scale: f64, source: &[f64]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += scale * s;
    }
}

/// Apply one triplet update in place. SV triplets move the anchor embedding
/// and the feature encoder (chain rule through `W x + b`); POI triplets move
/// the anchor and the two word rows; EDGE triplets move all three embedding
/// rows.
pub fn sgd_step(
    state: &mut TrainState,
    data: &TrainData,
    triplet: &Triplet,
    lr: f64,
    margin: f64,
) -> Result<StepOutcome> {
    let za = state.embeddings.row(triplet.anchor).to_vec();
    match &triplet.kind {
        TripletKind::StreetView => {
            let enc = state
                .feature_encoder
                .as_mut()
                .ok_or_else(|| Error::InvalidArgument("no feature encoder in state".into()))?;
            let xc = &data.features[triplet.context];
            let xn = &data.features[triplet.negative];
            let ec = enc.encode(xc)?;
            let en = enc.encode(xn)?;
            match triplet_grads(&za, &ec, &en, margin)? {
                TripletGrads::Inactive => Ok(StepOutcome::Inactive),
                TripletGrads::Degenerate => {
                    state.skipped_degenerate += 1;
                    Ok(StepOutcome::SkippedDegenerate {
                        loss: triplet_loss(&za, &ec, &en, margin)?,
                    })
                }
                TripletGrads::Active { g_za, g_ec, g_en } => {
                    ensure_finite(&[&g_za, &g_ec, &g_en], &triplet.kind, triplet.anchor)?;
                    let loss = triplet_loss(&za, &ec, &en, margin)?;
                    axpy(state.embeddings.row_mut(triplet.anchor), -lr, &g_za);
                    for i in 0..g_ec.len() {
                        let w_row = &mut enc.w[i];
                        for (j, w) in w_row.iter_mut().enumerate() {
                            *w -= lr * (g_ec[i] * xc[j] + g_en[i] * xn[j]);
                        }
                        enc.b[i] -= lr * (g_ec[i] + g_en[i]);
                    }
                    Ok(StepOutcome::Applied { loss })
                }
            }
        }
        TripletKind::Poi => {
            let words = state
                .word_encoder
                .as_mut()
                .ok_or_else(|| Error::InvalidArgument("no word encoder in state".into()))?;
            let ec = words.row(triplet.context).to_vec();
            let en = words.row(triplet.negative).to_vec();
            match triplet_grads(&za, &ec, &en, margin)? {
                TripletGrads::Inactive => Ok(StepOutcome::Inactive),
                TripletGrads::Degenerate => {
                    state.skipped_degenerate += 1;
                    Ok(StepOutcome::SkippedDegenerate {
                        loss: triplet_loss(&za, &ec, &en, margin)?,
                    })
                }
                TripletGrads::Active { g_za, g_ec, g_en } => {
                    ensure_finite(&[&g_za, &g_ec, &g_en], &triplet.kind, triplet.anchor)?;
                    let loss = triplet_loss(&za, &ec, &en, margin)?;
                    axpy(state.embeddings.row_mut(triplet.anchor), -lr, &g_za);
                    axpy(words.row_mut(triplet.context), -lr, &g_ec);
                    axpy(words.row_mut(triplet.negative), -lr, &g_en);
                    Ok(StepOutcome::Applied { loss })
                }
            }
        }
        TripletKind::Edge(_) => {
            let ec = state.embeddings.row(triplet.context).to_vec();
            let en = state.embeddings.row(triplet.negative).to_vec();
            match triplet_grads(&za, &ec, &en, margin)? {
                TripletGrads::Inactive => Ok(StepOutcome::Inactive),
                TripletGrads::Degenerate => {
                    state.skipped_degenerate += 1;
                    Ok(StepOutcome::SkippedDegenerate {
                        loss: triplet_loss(&za, &ec, &en, margin)?,
                    })
                }
                TripletGrads::Active { g_za, g_ec, g_en } => {
                    ensure_finite(&[&g_za, &g_ec, &g_en], &triplet.kind, triplet.anchor)?;
                    let loss = triplet_loss(&za, &ec, &en, margin)?;
                    axpy(state.embeddings.row_mut(triplet.anchor), -lr, &g_za);
                    axpy(state.embeddings.row_mut(triplet.context), -lr, &g_ec);
                    axpy(state.embeddings.row_mut(triplet.negative), -lr, &g_en);
                    Ok(StepOutcome::Applied { loss })
                }
            }
        }
    }
}

fn validate_inputs(data: &TrainData, word_encoder: &Option<WordEncoder>) -> Result<()> {
    let n = data.graph.n();
    if data.sv_items.len() != n || data.token_items.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if data.sv_items.len() != n {
                data.sv_items.len()
            } else {
                data.token_items.len()
            },
        });
    }
    if let Some(first) = data.features.first() {
        let f = first.len();
        for row in data.features {
            if row.len() != f {
                return Err(Error::DimensionMismatch {
                    expected: f,
                    got: row.len(),
                });
            }
        }
    }
    for items in data.sv_items {
        for &i in items {
            if i >= data.features.len() {
                return Err(Error::InvalidArgument(format!(
                    "street-view item index {i} out of range ({} features)",
                    data.features.len()
                )));
            }
        }
    }
    let vocab = word_encoder.as_ref().map(|w| w.vocab_size()).unwrap_or(0);
    for items in data.token_items {
        if !items.is_empty() && word_encoder.is_none() {
            return Err(Error::InvalidArgument(
                "token items provided without a word encoder".into(),
            ));
        }
        for &t in items {
            if t >= vocab {
                return Err(Error::InvalidArgument(format!(
                    "token id {t} out of range (vocabulary {vocab})"
                )));
            }
        }
    }
    Ok(())
}

/// Run the three-stage schedule. Stages with zero epochs, or intra stages
/// with no data at all, are skipped; a stage with some but unusable data
/// (e.g. a single non-empty container) is an error.
pub fn run_training(
    data: &TrainData,
    word_encoder: Option<WordEncoder>,
    config: &TrainConfig,
) -> Result<TrainState> {
    config.validate()?;
    validate_inputs(data, &word_encoder)?;
    let n = data.graph.n();
    let mut state = TrainState {
        embeddings: EmbeddingTable::init(
            n,
            config.d,
            derive_seed(config.seed, "init-embeddings"),
            config.init_scale,
        )?,
        feature_encoder: None,
        word_encoder,
        skipped_degenerate: 0,
        history: Vec::new(),
    };
    let mut rng = rng_for(config.seed, "train");
    let mut epoch = 0usize;

    // Stage 1: street view.
    let has_sv = data.sv_items.iter().any(|v| !v.is_empty());
    if config.epochs.sv > 0 && has_sv {
        let input_dim = data.features[0].len();
        state.feature_encoder = Some(FeatureEncoder::init(
            config.d,
            input_dim,
            derive_seed(config.seed, "init-features"),
            config.init_scale,
        )?);
        let sampler = IntraSampler::new(data.sv_items.to_vec())?;
        for _ in 0..config.epochs.sv {
            let schedule = make_epoch_schedule(
                &[(TripletKind::StreetView, config.triplets_per_kind)],
                &mut rng,
            )?;
            let mut sum = 0.0;
            let mut active = 0usize;
            for kind in schedule {
                let triplet = sampler.sample(kind, &mut rng);
                let outcome = sgd_step(&mut state, data, &triplet, config.lr.sv, config.margin)?;
                sum += outcome.loss();
                active += outcome.active() as usize;
            }
            state.history.push(EpochStats {
                epoch,
                kind: TripletKind::StreetView,
                mean_loss: sum / config.triplets_per_kind as f64,
                active_fraction: active as f64 / config.triplets_per_kind as f64,
            });
            epoch += 1;
        }
        check_state_finite(&state)?;
    }

    // Stage 2: POI words.
    let has_poi = data.token_items.iter().any(|v| !v.is_empty());
    if config.epochs.poi > 0 && has_poi {
        if state.word_encoder.is_none() {
            return Err(Error::InvalidArgument(
                "POI stage configured but no word encoder supplied".into(),
            ));
        }
        let sampler = IntraSampler::new(data.token_items.to_vec())?;
        for _ in 0..config.epochs.poi {
            let schedule = make_epoch_schedule(
                &[(TripletKind::Poi, config.triplets_per_kind)],
                &mut rng,
            )?;
            let mut sum = 0.0;
            let mut active = 0usize;
            for kind in schedule {
                let triplet = sampler.sample(kind, &mut rng);
                let outcome = sgd_step(&mut state, data, &triplet, config.lr.poi, config.margin)?;
                sum += outcome.loss();
                active += outcome.active() as usize;
            }
            state.history.push(EpochStats {
                epoch,
                kind: TripletKind::Poi,
                mean_loss: sum / config.triplets_per_kind as f64,
                active_fraction: active as f64 / config.triplets_per_kind as f64,
            });
            epoch += 1;
        }
        check_state_finite(&state)?;
    }

    // Stage 3: graph edges, modalities interleaved within each epoch.
    if config.epochs.edge > 0 && !config.edge_modalities.is_empty() {
        let samplers: Vec<(Modality, InterSampler)> = config
            .edge_modalities
            .iter()
            .map(|m| {
                InterSampler::new(data.graph, m, &config.threshold_for(m)).map(|s| (m.clone(), s))
            })
            .collect::<Result<_>>()?;
        let counts: Vec<(TripletKind, usize)> = samplers
            .iter()
            .map(|(m, _)| (TripletKind::Edge(m.clone()), config.triplets_per_kind))
            .collect();
        for _ in 0..config.epochs.edge {
            let schedule = make_epoch_schedule(&counts, &mut rng)?;
            let mut sum: BTreeMap<Modality, (f64, usize)> = BTreeMap::new();
            for kind in schedule {
                let modality = match &kind {
                    TripletKind::Edge(m) => m.clone(),
                    _ => unreachable!("edge stage schedules only edge kinds"),
                };
                let sampler = &samplers
                    .iter()
                    .find(|(m, _)| *m == modality)
                    .expect("modality sampled from configured set")
                    .1;
                let triplet = sampler.sample(&mut rng);
                let outcome =
                    sgd_step(&mut state, data, &triplet, config.lr.edge, config.margin)?;
                let entry = sum.entry(modality).or_insert((0.0, 0));
                entry.0 += outcome.loss();
                entry.1 += outcome.active() as usize;
            }
            for (modality, (loss_sum, active)) in sum {
                state.history.push(EpochStats {
                    epoch,
                    kind: TripletKind::Edge(modality),
                    mean_loss: loss_sum / config.triplets_per_kind as f64,
                    active_fraction: active as f64 / config.triplets_per_kind as f64,
                });
            }
            epoch += 1;
        }
        check_state_finite(&state)?;
    }

    Ok(state)
}

fn check_state_finite(state: &TrainState) -> Result<()> {
    if !state.embeddings.is_finite() {
        return Err(Error::NonFinite("embedding table".into()));
    }
    if let Some(enc) = &state.feature_encoder {
        if !enc.is_finite() {
            return Err(Error::NonFinite("feature encoder".into()));
        }
    }
    if let Some(words) = &state.word_encoder {
        if !words.is_finite() {
            return Err(Error::NonFinite("word table".into()));
        }
    }
    Ok(())
}
