//! Proximity probe: sample unordered node pairs and correlate embedding
//! distance against a per-modality ground signal.

use crate::error::{Error, Result};
use crate::eval::linalg::l2_distance;
use crate::eval::metrics::spearman_rho;
use crate::geo::{haversine_km, LonLat, Modality};
use crate::graph::Multigraph;
use crate::seeding::RunRng;
use rand::RngExt;
use std::collections::BTreeSet;

pub const MIN_PROXIMITY_PAIRS: u64 = 30;

#[derive(Debug, Clone)]
pub struct ProximityPair {
    pub id_a: String,
    pub id_b: String,
    pub embedding_distance: f64,
    /// Centroid distance in km for the DIST modality; summed directed edge
    /// weight w(a->b) + w(b->a) for every other modality.
    pub ground: f64,
}

#[derive(Debug, Clone)]
pub struct ProximityResult {
    pub modality: Modality,
    pub pairs: Vec<ProximityPair>,
    pub spearman: f64,
}

/// Lexicographic rank of pair (i, j), i < j, over n nodes.
fn pair_rank(i: u64, j: u64, n: u64) -> u64 {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of `pair_rank`: row offsets are monotone in i, so the row is the
/// last one whose offset does not exceed the rank.
fn unrank_pair(rank: u64, n: u64) -> (u64, u64) {
    let rows: Vec<u64> = (0..n - 1).collect();
    let split = rows.partition_point(|&i| pair_rank(i, i + 1, n) <= rank);
    let i = (split - 1) as u64;
    let j = rank - pair_rank(i, i + 1, n) + i + 1;
    (i, j)
}

/// Floyd's algorithm: m distinct draws from 0..total, uniform over subsets.
fn sample_distinct(total: u64, m: u64, rng: &mut RunRng) -> BTreeSet<u64> {
    let mut chosen = BTreeSet::new();
    for t in (total - m)..total {
        let r = rng.random_range(0..=t);
        if !chosen.insert(r) {
            chosen.insert(t);
        }
    }
    chosen
}

/// Draw `round(sample_frac * C(n,2))` distinct pairs and correlate their
/// embedding distances with the modality's ground signal. `centroids` and
/// `embeddings` are aligned with the graph's node indices.
pub fn proximity_probe(
    graph: &Multigraph,
    modality: &Modality,
    centroids: &[LonLat],
    embeddings: &[Vec<f64>],
    sample_frac: f64,
    rng: &mut RunRng,
) -> Result<ProximityResult> {
    let n = graph.n();
    if centroids.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: centroids.len(),
        });
    }
    if embeddings.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: embeddings.len(),
        });
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample_frac must be in (0, 1], got {sample_frac}"
        )));
    }
    if !graph.has_layer(modality) {
        return Err(Error::UnknownModality(modality.to_string()));
    }

    let total = (n as u64) * (n as u64 - 1) / 2;
    let m = (sample_frac * total as f64).round() as u64;
    if m < MIN_PROXIMITY_PAIRS {
        return Err(Error::InsufficientData(format!(
            "proximity sample of {m} pairs is below the floor of \
             {MIN_PROXIMITY_PAIRS}; raise sample_frac or add neighborhoods"
        )));
    }

    let is_dist = *modality == Modality::dist();
    let ranks = sample_distinct(total, m, rng);
    let mut pairs = Vec::with_capacity(m as usize);
    let mut emb_d = Vec::with_capacity(m as usize);
    let mut ground_v = Vec::with_capacity(m as usize);
    for rank in ranks {
        let (i, j) = unrank_pair(rank, n as u64);
        let (i, j) = (i as usize, j as usize);
        let e = l2_distance(&embeddings[i], &embeddings[j]);
        let g = if is_dist {
            haversine_km(centroids[i], centroids[j])
        } else {
            graph.weight(modality, i, j)? + graph.weight(modality, j, i)?
        };
        emb_d.push(e);
        ground_v.push(g);
        pairs.push(ProximityPair {
            id_a: graph.ids()[i].clone(),
            id_b: graph.ids()[j].clone(),
            embedding_distance: e,
            ground: g,
        });
    }
    let spearman = spearman_rho(&emb_d, &ground_v)?;
    Ok(ProximityResult {
        modality: modality.clone(),
        pairs,
        spearman,
    })
}
