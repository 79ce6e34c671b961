//! Multi-layer directed graph over neighborhoods and the per-anchor context
//! distributions induced by a thresholding function.
//!
//! Each modality contributes one edge layer. Within a layer, reciprocal
//! records expand to both directions, duplicate `(src, dst)` weights sum,
//! and self-loops are dropped (counted). Context probabilities for anchor
//! `a` are the thresholded edge weights renormalized over `a`'s out-edges:
//!
//! `P[a -> j] = p(w[a -> j]) / sum_k p(w[a -> k])`
//!
//! and the negative pool for `a` is every other node with `P[a -> j] = 0`,
//! including nodes with no edge from `a` at all.

use crate::error::{Error, Result};
use crate::geo::{haversine_km, Modality, Neighborhood};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A directed, weighted edge record between node indices. `reciprocal`
/// records stand for both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    pub reciprocal: bool,
}

/// Bookkeeping from building one edge layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerStats {
    /// Directed edges kept after merging.
    pub edges: usize,
    /// Directed self-loop edges discarded.
    pub self_loops_dropped: usize,
    /// Directed edges folded into an existing `(src, dst)` slot.
    pub duplicates_merged: usize,
}

#[derive(Debug, Clone)]
struct Layer {
    /// Out-edges per node, sorted by destination index.
    out: Vec<Vec<(usize, f64)>>,
    stats: LayerStats,
}

/// Node set shared across modality layers.
#[derive(Debug, Clone)]
pub struct Multigraph {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    layers: BTreeMap<Modality, Layer>,
}

impl Multigraph {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("graph node list".into()));
        }
        let mut index = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Multigraph {
            ids,
            index,
            layers: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn modalities(&self) -> impl Iterator<Item = &Modality> {
        self.layers.keys()
    }

    pub fn has_layer(&self, modality: &Modality) -> bool {
        self.layers.contains_key(modality)
    }

    /// Install (or replace) the edge layer for one modality.
    pub fn add_layer(&mut self, modality: Modality, records: &[EdgeRecord]) -> Result<LayerStats> {
        let n = self.n();
        let mut merged: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut stats = LayerStats::default();
        for rec in records {
            if !rec.weight.is_finite() || rec.weight < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge weight must be finite and non-negative, got {}",
                    rec.weight
                )));
            }
            if rec.src >= n || rec.dst >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge endpoint out of range: {} -> {} with {} nodes",
                    rec.src, rec.dst, n
                )));
            }
            let mut directed = vec![(rec.src, rec.dst)];
            if rec.reciprocal {
                directed.push((rec.dst, rec.src));
            }
            for (s, d) in directed {
                if s == d {
                    stats.self_loops_dropped += 1;
                    continue;
                }
                match merged[s].get_mut(&d) {
                    Some(w) => {
                        *w += rec.weight;
                        stats.duplicates_merged += 1;
                    }
                    None => {
                        merged[s].insert(d, rec.weight);
                    }
                }
            }
        }
        let out: Vec<Vec<(usize, f64)>> = merged
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        stats.edges = out.iter().map(|e| e.len()).sum();
        self.layers.insert(modality, Layer { out, stats });
        Ok(stats)
    }

    fn layer(&self, modality: &Modality) -> Result<&Layer> {
        self.layers
            .get(modality)
            .ok_or_else(|| Error::UnknownModality(modality.to_string()))
    }

    /// Out-edges of `node` in one layer, sorted by destination.
    pub fn out_edges(&self, modality: &Modality, node: usize) -> Result<&[(usize, f64)]> {
        let layer = self.layer(modality)?;
        layer
            .out
            .get(node)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("node {node} out of range")))
    }

    pub fn layer_stats(&self, modality: &Modality) -> Result<LayerStats> {
        Ok(self.layer(modality)?.stats)
    }

    /// Context distribution of `anchor` under `threshold`; see module docs.
    pub fn context_row(
        &self,
        modality: &Modality,
        anchor: usize,
        threshold: &ThresholdFn,
    ) -> Result<ContextRow> {
        let edges = self.out_edges(modality, anchor)?;
        let raw = threshold.apply(edges);
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::NoContext {
                anchor,
                modality: modality.to_string(),
            });
        }
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        for ((dst, _), p) in edges.iter().zip(&raw) {
            if *p > 0.0 {
                targets.push(*dst);
                probs.push(p / total);
            }
        }
        let mut excluded: Vec<usize> = targets.clone();
        if !excluded.contains(&anchor) {
            excluded.push(anchor);
            excluded.sort_unstable();
        }
        Ok(ContextRow {
            anchor,
            targets,
            probs,
            excluded,
            n: self.n(),
        })
    }

    /// Every node outside the anchor's context support (and not the anchor
    /// itself); errors when the support covers all other nodes.
    pub fn negative_set(
        &self,
        modality: &Modality,
        anchor: usize,
        threshold: &ThresholdFn,
    ) -> Result<Vec<usize>> {
        let row = self.context_row(modality, anchor, threshold)?;
        if row.negative_count() == 0 {
            return Err(Error::EmptyNegativeSet {
                anchor,
                modality: modality.to_string(),
            });
        }
        Ok(row.negatives())
    }

    /// Directed weight `src -> dst`, or 0 when the layer holds no such edge.
    pub fn weight(&self, modality: &Modality, src: usize, dst: usize) -> Result<f64> {
        let edges = self.out_edges(modality, src)?;
        Ok(match edges.binary_search_by(|(d, _)| d.cmp(&dst)) {
            Ok(i) => edges[i].1,
            Err(_) => 0.0,
        })
    }
}

/// Normalized context distribution of one anchor in one modality layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextRow {
    pub anchor: usize,
    /// Support of the distribution, sorted by node index.
    pub targets: Vec<usize>,
    /// Probabilities aligned with `targets`; strictly positive, sums to 1.
    pub probs: Vec<f64>,
    /// Sorted union of `targets` and the anchor itself; everything else is
    /// a negative.
    excluded: Vec<usize>,
    n: usize,
}

impl ContextRow {
    pub fn prob_of(&self, node: usize) -> f64 {
        match self.targets.binary_search(&node) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn negative_count(&self) -> usize {
        self.n - self.excluded.len()
    }

    /// Map `k` in `0..negative_count()` to the `k`-th node (by index order)
    /// outside the support and anchor.
    pub fn negative_at(&self, k: usize) -> usize {
        let mut node = k;
        for &ex in &self.excluded {
            if node >= ex {
                node += 1;
            } else {
                break;
            }
        }
        node
    }

    pub fn negatives(&self) -> Vec<usize> {
        (0..self.negative_count()).map(|k| self.negative_at(k)).collect()
    }
}

/// Turns raw edge weights into unnormalized context mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdFn {
    /// `p(w) = 1` when `w > t`, else 0.
    Step(f64),
    /// `p(w) = 1` for exactly the `min(k, out-degree)` edges ranked first
    /// by weight descending, destination index ascending.
    TopK(usize),
    /// `p(w) = w`.
    Identity,
}

impl ThresholdFn {
    /// Unnormalized mass per edge, aligned with the input slice.
    pub fn apply(&self, edges: &[(usize, f64)]) -> Vec<f64> {
        match *self {
            ThresholdFn::Step(t) => edges
                .iter()
                .map(|&(_, w)| if w > t { 1.0 } else { 0.0 })
                .collect(),
            ThresholdFn::TopK(k) => {
                let mut order: Vec<usize> = (0..edges.len()).collect();
                order.sort_by(|&a, &b| {
                    edges[b]
                        .1
                        .partial_cmp(&edges[a].1)
                        .expect("finite weights")
                        .then(edges[a].0.cmp(&edges[b].0))
                });
                let mut mass = vec![0.0; edges.len()];
                for &i in order.iter().take(k.min(edges.len())) {
                    mass[i] = 1.0;
                }
                mass
            }
            ThresholdFn::Identity => edges.iter().map(|&(_, w)| w).collect(),
        }
    }

    /// Parse the textual form used in config files: `STEP:<t>`, `TOP_K:<k>`,
    /// or `IDENTITY`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("IDENTITY") {
            return Ok(ThresholdFn::Identity);
        }
        if let Some(rest) = s
            .strip_prefix("STEP:")
            .or_else(|| s.strip_prefix("step:"))
        {
            let t: f64 = rest.trim().parse().map_err(|_| Error::Parse {
                context: "threshold".into(),
                reason: format!("bad STEP threshold {rest:?}"),
            })?;
            if !t.is_finite() {
                return Err(Error::Parse {
                    context: "threshold".into(),
                    reason: "STEP threshold must be finite".into(),
                });
            }
            return Ok(ThresholdFn::Step(t));
        }
        if let Some(rest) = s
            .strip_prefix("TOP_K:")
            .or_else(|| s.strip_prefix("top_k:"))
        {
            let k: usize = rest.trim().parse().map_err(|_| Error::Parse {
                context: "threshold".into(),
                reason: format!("bad TOP_K count {rest:?}"),
            })?;
            if k == 0 {
                return Err(Error::Parse {
                    context: "threshold".into(),
                    reason: "TOP_K count must be positive".into(),
                });
            }
            return Ok(ThresholdFn::TopK(k));
        }
        Err(Error::Parse {
            context: "threshold".into(),
            reason: format!("unknown threshold function {s:?}"),
        })
    }
}

impl fmt::Display for ThresholdFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdFn::Step(t) => write!(f, "STEP:{t}"),
            ThresholdFn::TopK(k) => write!(f, "TOP_K:{k}"),
            ThresholdFn::Identity => f.write_str("IDENTITY"),
        }
    }
}

/// How spatial-proximity edges pair up neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistPairing {
    /// Every unordered pair.
    All,
    /// Union over nodes of their `k` nearest others (unordered dedup).
    Knn(usize),
}

/// All-pairs below this node count, 50-nearest-neighbors above it.
pub fn default_dist_pairing(n: usize) -> DistPairing {
    if n > 2000 {
        DistPairing::Knn(50)
    } else {
        DistPairing::All
    }
}

/// Build reciprocal inverse-distance edge records from neighborhood
/// centroids: `w = 1 / haversine_km`. Coincident centroids are an error.
pub fn build_dist_records(
    neighborhoods: &[Neighborhood],
    pairing: DistPairing,
) -> Result<Vec<EdgeRecord>> {
    let n = neighborhoods.len();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    match pairing {
        DistPairing::All => {
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.insert((i, j));
                }
            }
        }
        DistPairing::Knn(k) => {
            for i in 0..n {
                let mut dists: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        (
                            haversine_km(neighborhoods[i].centroid, neighborhoods[j].centroid),
                            j,
                        )
                    })
                    .collect();
                dists.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("finite distances")
                        .then(neighborhoods[a.1].id.cmp(&neighborhoods[b.1].id))
                });
                for &(_, j) in dists.iter().take(k) {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    let mut records = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let d = haversine_km(neighborhoods[i].centroid, neighborhoods[j].centroid);
        if d == 0.0 {
            return Err(Error::CoincidentCentroids {
                a: neighborhoods[i].id.clone(),
                b: neighborhoods[j].id.clone(),
            });
        }
        records.push(EdgeRecord {
            src: i,
            dst: j,
            weight: 1.0 / d,
            reciprocal: true,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LonLat;
    use crate::seeding::rng_for;
    use rand::RngExt;

    fn graph(n: usize) -> Multigraph {
        Multigraph::new((0..n).map(|i| format!("n{i}")).collect()).unwrap()
    }

    fn rec(src: usize, dst: usize, weight: f64) -> EdgeRecord {
        EdgeRecord {
            src,
            dst,
            weight,
            reciprocal: false,
        }
    }

    #[test]
    fn reciprocal_records_expand_both_ways() {
        let mut g = graph(3);
        let stats = g
            .add_layer(
                Modality::dist(),
                &[EdgeRecord {
                    src: 0,
                    dst: 1,
                    weight: 2.0,
                    reciprocal: true,
                }],
            )
            .unwrap();
        assert_eq!(stats.edges, 2);
        assert_eq!(g.out_edges(&Modality::dist(), 0).unwrap(), &[(1, 2.0)]);
        assert_eq!(g.out_edges(&Modality::dist(), 1).unwrap(), &[(0, 2.0)]);
    }

    #[test]
    fn duplicate_edges_sum_weights() {
        let mut g = graph(2);
        let stats = g
            .add_layer(Modality::mob(), &[rec(0, 1, 1.5), rec(0, 1, 2.5)])
            .unwrap();
        assert_eq!(stats.edges, 1);
        assert_eq!(stats.duplicates_merged, 1);
        assert_eq!(g.out_edges(&Modality::mob(), 0).unwrap(), &[(1, 4.0)]);
    }

    #[test]
    fn self_loops_are_dropped_and_counted() {
        let mut g = graph(2);
        let stats = g
            .add_layer(
                Modality::mob(),
                &[
                    rec(0, 0, 3.0),
                    EdgeRecord {
                        src: 1,
                        dst: 1,
                        weight: 1.0,
                        reciprocal: true,
                    },
                    rec(0, 1, 1.0),
                ],
            )
            .unwrap();
        // A reciprocal self-loop expands to two directed self-loops.
        assert_eq!(stats.self_loops_dropped, 3);
        assert_eq!(stats.edges, 1);
    }

    #[test]
    fn unknown_modality_is_an_error() {
        let g = graph(2);
        let err = g.out_edges(&Modality::poi(), 0).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_MODALITY");
    }

    #[test]
    fn weight_lookup_is_directed_with_zero_default() {
        let mut g = graph(3);
        g.add_layer(Modality::mob(), &[rec(0, 1, 2.0), rec(2, 0, 5.0)])
            .unwrap();
        assert_eq!(g.weight(&Modality::mob(), 0, 1).unwrap(), 2.0);
        assert_eq!(g.weight(&Modality::mob(), 1, 0).unwrap(), 0.0);
        assert_eq!(g.weight(&Modality::mob(), 2, 0).unwrap(), 5.0);
        assert_eq!(g.weight(&Modality::mob(), 1, 2).unwrap(), 0.0);
        assert!(g.weight(&Modality::dist(), 0, 1).is_err());
    }

    #[test]
    fn negative_weight_rejected() {
        let mut g = graph(2);
        let err = g.add_layer(Modality::mob(), &[rec(0, 1, -1.0)]).unwrap_err();
        assert_eq!(err.code(), "INVALID_ARGUMENT");
    }

    #[test]
    fn step_threshold_keeps_strictly_greater() {
        // 1/500 boundary: visits above the cutoff keep mass, at/below lose it.
        let t = 1.0 / 500.0;
        let f = ThresholdFn::Step(t);
        let mass = f.apply(&[(0, 0.0030), (1, t), (2, 0.0015)]);
        assert_eq!(mass, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn top_k_ranks_by_weight_then_index() {
        let f = ThresholdFn::TopK(2);
        // Equal weights at dst 1 and 3: the smaller destination qualifies.
        let mass = f.apply(&[(1, 5.0), (2, 9.0), (3, 5.0)]);
        assert_eq!(mass, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn top_k_larger_than_degree_takes_all() {
        let f = ThresholdFn::TopK(10);
        assert_eq!(f.apply(&[(0, 1.0), (1, 2.0)]), vec![1.0, 1.0]);
    }

    #[test]
    fn context_row_matches_formula_oracle() {
        // Independent recomputation straight from the definition on random
        // graphs: p-values per edge, normalized by the anchor's total.
        let mut rng = rng_for(21, "graph-context-oracle");
        for case in 0..20 {
            let n = rng.random_range(3..=10);
            let mut g = graph(n);
            let mut recs = Vec::new();
            let m = rng.random_range(1..=30);
            for _ in 0..m {
                recs.push(EdgeRecord {
                    src: rng.random_range(0..n),
                    dst: rng.random_range(0..n),
                    weight: rng.random_range(0.0..4.0),
                    reciprocal: rng.random_range(0..2) == 1,
                });
            }
            g.add_layer(Modality::mob(), &recs).unwrap();
            let threshold = match case % 3 {
                0 => ThresholdFn::Identity,
                1 => ThresholdFn::Step(1.0),
                _ => ThresholdFn::TopK(2),
            };
            for a in 0..n {
                let edges = g.out_edges(&Modality::mob(), a).unwrap().to_vec();
                let mass = threshold.apply(&edges);
                let total: f64 = mass.iter().sum();
                let row = g.context_row(&Modality::mob(), a, &threshold);
                if total <= 0.0 {
                    assert_eq!(row.unwrap_err().code(), "NO_CONTEXT");
                    continue;
                }
                let row = row.unwrap();
                let sum: f64 = row.probs.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                for (&(dst, _), &p) in edges.iter().zip(&mass) {
                    let expect = p / total;
                    assert!(
                        (row.prob_of(dst) - expect).abs() < 1e-12,
                        "anchor {a} dst {dst}: {} vs {expect}",
                        row.prob_of(dst)
                    );
                }
                // Negative pool is exactly the zero-probability complement.
                let naive: Vec<usize> = (0..n)
                    .filter(|&j| j != a && row.prob_of(j) == 0.0)
                    .collect();
                assert_eq!(row.negatives(), naive);
                assert_eq!(row.negative_count(), naive.len());
            }
        }
    }

    #[test]
    fn negative_at_walks_complement() {
        let mut g = graph(6);
        g.add_layer(Modality::mob(), &[rec(2, 0, 1.0), rec(2, 4, 1.0)])
            .unwrap();
        let row = g
            .context_row(&Modality::mob(), 2, &ThresholdFn::Identity)
            .unwrap();
        // Excluded: {0, 2, 4}; complement in order: 1, 3, 5.
        assert_eq!(row.negative_count(), 3);
        assert_eq!(row.negatives(), vec![1, 3, 5]);
        assert_eq!(row.negative_at(0), 1);
        assert_eq!(row.negative_at(1), 3);
        assert_eq!(row.negative_at(2), 5);
    }

    #[test]
    fn no_context_when_threshold_starves_anchor() {
        let mut g = graph(3);
        g.add_layer(Modality::mob(), &[rec(0, 1, 0.5)]).unwrap();
        let err = g
            .context_row(&Modality::mob(), 0, &ThresholdFn::Step(1.0))
            .unwrap_err();
        assert_eq!(err.code(), "NO_CONTEXT");
    }

    #[test]
    fn threshold_parse_round_trips() {
        for f in [
            ThresholdFn::Step(0.002),
            ThresholdFn::TopK(5),
            ThresholdFn::Identity,
        ] {
            assert_eq!(ThresholdFn::parse(&f.to_string()).unwrap(), f);
        }
        assert!(ThresholdFn::parse("TOP_K:0").is_err());
        assert!(ThresholdFn::parse("STEP:abc").is_err());
        assert!(ThresholdFn::parse("RAMP:1").is_err());
    }

    fn centroid_nb(id: &str, lon: f64, lat: f64) -> Neighborhood {
        Neighborhood::from_centroid(id, "t", LonLat::new(lon, lat).unwrap())
    }

    #[test]
    fn dist_all_pairs_builds_complete_graph() {
        let nbs = vec![
            centroid_nb("a", 0.0, 0.0),
            centroid_nb("b", 1.0, 0.0),
            centroid_nb("c", 0.0, 1.0),
            centroid_nb("d", 1.0, 1.0),
        ];
        let recs = build_dist_records(&nbs, DistPairing::All).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.reciprocal));
        let mut g = Multigraph::new(nbs.iter().map(|nb| nb.id.clone()).collect()).unwrap();
        let stats = g.add_layer(Modality::dist(), &recs).unwrap();
        assert_eq!(stats.edges, 12);
        // Inverse distance: nearer pair carries more weight.
        let w_ab = g.out_edges(&Modality::dist(), 0).unwrap()[0].1;
        let d_ab = haversine_km(nbs[0].centroid, nbs[1].centroid);
        assert!((w_ab - 1.0 / d_ab).abs() < 1e-12);
    }

    #[test]
    fn dist_knn_unions_unordered_pairs() {
        // Collinear points at 0, 1, 3 degrees: 1-NN gives pairs {0,1} and
        // {1,3} only (3's nearest is 1; 0 and 3 never pair).
        let nbs = vec![
            centroid_nb("a", 0.0, 0.0),
            centroid_nb("b", 1.0, 0.0),
            centroid_nb("c", 3.0, 0.0),
        ];
        let recs = build_dist_records(&nbs, DistPairing::Knn(1)).unwrap();
        let pairs: Vec<(usize, usize)> = recs.iter().map(|r| (r.src, r.dst)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn coincident_centroids_rejected() {
        let nbs = vec![centroid_nb("a", 0.0, 0.0), centroid_nb("b", 0.0, 0.0)];
        let err = build_dist_records(&nbs, DistPairing::All).unwrap_err();
        assert_eq!(err.code(), "COINCIDENT_CENTROIDS");
    }

    #[test]
    fn default_pairing_switches_at_scale() {
        assert_eq!(default_dist_pairing(2000), DistPairing::All);
        assert_eq!(default_dist_pairing(2001), DistPairing::Knn(50));
    }
}
