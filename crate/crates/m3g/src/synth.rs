//! Synthetic-city generator: a ground-truth world with latent communities,
//! spatially clustered centroids, community-flavored street-view features
//! and POI tokens, distance-damped mobility, and attributes that mix
//! community and location signal in known proportions.

use crate::error::{Error, Result};
use crate::eval::downstream::AttributeTable;
use crate::eval::linalg::{mean, sample_std};
use crate::geo::{haversine_km, LonLat, Modality, Neighborhood, PointDatum, RelationDatum};
use crate::seeding::{rng_for, RunRng};
use rand::RngExt;

/// Longitude offset between city tiles, degrees.
const CITY_SPACING_DEG: f64 = 20.0;
/// Side of the square region holding one city, degrees.
const CITY_SPAN_DEG: f64 = 0.4;
/// Tile side as a fraction of the neighborhood's private subcell. Keeping
/// this below 1 - 2 * CENTROID_JITTER_FRAC guarantees pairwise-disjoint
/// polygons, so every point and centroid resolves back to the neighborhood
/// that spawned it.
const TILE_FILL: f64 = 0.5;
/// Centroid jitter as a fraction of the subcell.
const CENTROID_JITTER_FRAC: f64 = 0.1;
/// Community/location mixing weights for the six generated attributes.
const ATTR_LAMBDAS: [f64; 6] = [0.9, 0.7, 0.5, 0.5, 0.3, 0.1];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub cities: usize,
    /// Neighborhoods per city.
    pub neighborhoods: usize,
    /// Latent communities per city.
    pub communities: usize,
    pub d_feat: usize,
    pub vocab: usize,
    pub sv_per_neighborhood: usize,
    pub tokens_per_neighborhood: usize,
    /// Trip counts are round(trip_scale * exp(affinity) / (1 + km)).
    pub trip_scale: f64,
    /// Same-community affinity; cross-community affinity is 0.
    pub community_affinity: f64,
    pub sv_noise: f64,
    pub attr_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            cities: 1,
            neighborhoods: 200,
            communities: 4,
            d_feat: 32,
            vocab: 120,
            sv_per_neighborhood: 20,
            tokens_per_neighborhood: 30,
            trip_scale: 10.0,
            community_affinity: 2.0,
            sv_noise: 0.5,
            attr_noise: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cities", self.cities),
            ("neighborhoods", self.neighborhoods),
            ("communities", self.communities),
            ("d_feat", self.d_feat),
            ("vocab", self.vocab),
            ("sv_per_neighborhood", self.sv_per_neighborhood),
            ("tokens_per_neighborhood", self.tokens_per_neighborhood),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.communities > self.neighborhoods {
            return Err(Error::Config(format!(
                "communities ({}) must not exceed neighborhoods ({})",
                self.communities, self.neighborhoods
            )));
        }
        if self.vocab < self.communities {
            return Err(Error::Config(format!(
                "vocab ({}) must be >= communities ({}) so each community \
                 gets a token block",
                self.vocab, self.communities
            )));
        }
        // City tiles march east at 20 degrees apiece and must stay on-globe.
        if self.cities > 8 {
            return Err(Error::Config(format!(
                "cities must be <= 8, got {}",
                self.cities
            )));
        }
        if !(self.trip_scale.is_finite() && self.trip_scale > 0.0) {
            return Err(Error::Config("trip_scale must be > 0".into()));
        }
        for (name, v) in [
            ("community_affinity", self.community_affinity),
            ("sv_noise", self.sv_noise),
            ("attr_noise", self.attr_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub neighborhoods: Vec<Neighborhood>,
    /// Latent community per neighborhood (within its city).
    pub communities: Vec<usize>,
    pub sv_points: Vec<PointDatum>,
    pub poi_points: Vec<PointDatum>,
    /// Directed mobility records with centroid endpoints.
    pub relations: Vec<RelationDatum>,
    /// Noisy attribute table (what a real survey would give us).
    pub attributes: AttributeTable,
    /// Noiseless targets, same column names.
    pub attributes_true: AttributeTable,
}

impl SynthWorld {
    /// The noiseless targets under `*_true` column names, for acceptance
    /// bounds on achievable scores.
    pub fn oracle_attributes(&self) -> AttributeTable {
        AttributeTable {
            ids: self.attributes_true.ids.clone(),
            names: self
                .attributes_true
                .names
                .iter()
                .map(|n| format!("{n}_true"))
                .collect(),
            values: self.attributes_true.values.clone(),
        }
    }
}

/// Standard normal via Box-Muller; uses two uniform draws per call.
fn gaussian(rng: &mut RunRng) -> f64 {
    let u1: f64 = 1.0 - rng.random_range(0.0..1.0); // (0, 1]
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Z-score; a constant vector maps to zeros instead of dividing by zero.
fn standardize(values: &[f64]) -> Vec<f64> {
    let m = mean(values);
    let s = sample_std(values);
    if s == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - m) / s).collect()
}

fn square_ring(center: LonLat, side: f64) -> Result<Vec<LonLat>> {
    let h = side / 2.0;
    Ok(vec![
        LonLat::new(center.lon - h, center.lat - h)?,
        LonLat::new(center.lon + h, center.lat - h)?,
        LonLat::new(center.lon + h, center.lat + h)?,
        LonLat::new(center.lon - h, center.lat + h)?,
    ])
}

pub fn generate(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let mut rng = rng_for(config.seed, "synth");
    let k = config.communities;
    let n = config.neighborhoods;
    let grid = (k as f64).sqrt().ceil() as usize;
    let cell = CITY_SPAN_DEG / grid as f64;
    let block = config.vocab / k;

    let mut neighborhoods = Vec::with_capacity(config.cities * n);
    let mut communities = Vec::with_capacity(config.cities * n);
    let mut sv_points = Vec::new();
    let mut poi_points = Vec::new();
    let mut relations = Vec::new();
    // Community feature means per (city, community), for SV draws.
    let mut city_means: Vec<Vec<Vec<f64>>> = Vec::with_capacity(config.cities);

    // Each community owns one coarse cell; each member neighborhood owns a
    // private subcell inside it.
    let members = n.div_ceil(k);
    let sub_grid = (members as f64).sqrt().ceil() as usize;
    let sub = cell / sub_grid as f64;
    let side = TILE_FILL * sub;
    let jitter = CENTROID_JITTER_FRAC * sub;

    for ci in 0..config.cities {
        let base_lon = ci as f64 * CITY_SPACING_DEG;
        let means: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..config.d_feat).map(|_| gaussian(&mut rng)).collect())
            .collect();

        for i in 0..n {
            let community = i % k;
            let slot = i / k;
            let center = LonLat::new(
                base_lon
                    + (community % grid) as f64 * cell
                    + ((slot % sub_grid) as f64 + 0.5) * sub
                    + rng.random_range(-jitter..jitter),
                (community / grid) as f64 * cell
                    + ((slot / sub_grid) as f64 + 0.5) * sub
                    + rng.random_range(-jitter..jitter),
            )?;
            let nb = Neighborhood::from_polygon(
                format!("c{ci}_n{i:04}"),
                format!("c{ci}"),
                square_ring(center, side)?,
            )?;
            // Interior sampling margin keeps points strictly inside the tile.
            let margin = side * 0.45;
            let interior_point = |rng: &mut RunRng| -> Result<LonLat> {
                LonLat::new(
                    center.lon + rng.random_range(-margin..margin),
                    center.lat + rng.random_range(-margin..margin),
                )
            };
            for _ in 0..config.sv_per_neighborhood {
                let loc = interior_point(&mut rng)?;
                let values: Vec<f64> = means[community]
                    .iter()
                    .map(|m| m + config.sv_noise * gaussian(&mut rng))
                    .collect();
                sv_points.push(PointDatum::features(Modality::streetview(), loc, values)?);
            }
            let mut remaining = config.tokens_per_neighborhood;
            while remaining > 0 {
                let bag = remaining.min(3);
                let loc = interior_point(&mut rng)?;
                let tokens: Vec<String> = (0..bag)
                    .map(|_| {
                        let t = if rng.random_range(0.0..1.0) < 0.7 {
                            community * block + rng.random_range(0..block)
                        } else {
                            rng.random_range(0..config.vocab)
                        };
                        format!("t{t:03}")
                    })
                    .collect();
                poi_points.push(PointDatum::tokens(Modality::poi(), loc, tokens)?);
                remaining -= bag;
            }
            neighborhoods.push(nb);
            communities.push(community);
        }
        city_means.push(means);
    }

    // Mobility: directed trips between every within-city ordered pair.
    for ci in 0..config.cities {
        let offset = ci * n;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let a = &neighborhoods[offset + i];
                let b = &neighborhoods[offset + j];
                let affinity = if communities[offset + i] == communities[offset + j] {
                    config.community_affinity
                } else {
                    0.0
                };
                let km = haversine_km(a.centroid, b.centroid);
                let trips =
                    (config.trip_scale * affinity.exp() / (1.0 + km)).round();
                if trips > 0.0 {
                    relations.push(RelationDatum::new(
                        Modality::mob(),
                        trips,
                        a.centroid,
                        b.centroid,
                        false,
                    )?);
                }
            }
        }
    }

    // Attributes: per-column mix of a community value and a linear function
    // of the centroid, z-scored so the clean signal has unit variance.
    let total = neighborhoods.len();
    let ids: Vec<String> = neighborhoods.iter().map(|nb| nb.id.clone()).collect();
    let names: Vec<String> = (0..ATTR_LAMBDAS.len()).map(|a| format!("attr{a}")).collect();
    let mut true_cols: Vec<Vec<f64>> = Vec::with_capacity(ATTR_LAMBDAS.len());
    let mut noisy_cols: Vec<Vec<f64>> = Vec::with_capacity(ATTR_LAMBDAS.len());
    for &lambda in &ATTR_LAMBDAS {
        let community_values: Vec<Vec<f64>> = (0..config.cities)
            .map(|_| (0..k).map(|_| gaussian(&mut rng)).collect())
            .collect();
        let alpha = gaussian(&mut rng);
        let beta = gaussian(&mut rng);
        let c_raw: Vec<f64> = (0..total)
            .map(|idx| community_values[idx / n][communities[idx]])
            .collect();
        let l_raw: Vec<f64> = neighborhoods
            .iter()
            .map(|nb| alpha * nb.centroid.lon + beta * nb.centroid.lat)
            .collect();
        let c_z = standardize(&c_raw);
        let l_z = standardize(&l_raw);
        let mixed: Vec<f64> = c_z
            .iter()
            .zip(&l_z)
            .map(|(c, l)| lambda * c + (1.0 - lambda) * l)
            .collect();
        let signal = standardize(&mixed);
        let noisy: Vec<f64> = signal
            .iter()
            .map(|s| s + config.attr_noise * gaussian(&mut rng))
            .collect();
        true_cols.push(signal);
        noisy_cols.push(noisy);
    }
    let to_rows = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..total)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect()
    };
    let attributes = AttributeTable::new(ids.clone(), names.clone(), to_rows(&noisy_cols))?;
    let attributes_true = AttributeTable::new(ids, names, to_rows(&true_cols))?;

    Ok(SynthWorld {
        neighborhoods,
        communities,
        sv_points,
        poi_points,
        relations,
        attributes,
        attributes_true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::r2_score;
    use crate::eval::regression::ridge_fit;
    use crate::geo::{assign_points, AssignMode, PointPayload};

    fn small_config() -> SynthConfig {
        SynthConfig {
            neighborhoods: 40,
            sv_per_neighborhood: 5,
            tokens_per_neighborhood: 7,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn validation_catches_bad_configs() {
        let ok = small_config();
        assert!(ok.validate().is_ok());
        for bad in [
            SynthConfig { communities: 0, ..ok.clone() },
            SynthConfig { communities: 50, ..ok.clone() },
            SynthConfig { vocab: 2, communities: 4, ..ok.clone() },
            SynthConfig { cities: 9, ..ok.clone() },
            SynthConfig { trip_scale: 0.0, ..ok.clone() },
            SynthConfig { attr_noise: -0.1, ..ok.clone() },
        ] {
            assert_eq!(generate(&bad).unwrap_err().code(), "CONFIG");
        }
    }

    #[test]
    fn shapes_and_ids() {
        let config = small_config();
        let world = generate(&config).unwrap();
        assert_eq!(world.neighborhoods.len(), 40);
        assert_eq!(world.communities.len(), 40);
        assert_eq!(world.sv_points.len(), 40 * 5);
        let total_tokens: usize = world
            .poi_points
            .iter()
            .map(|p| match &p.payload {
                PointPayload::Tokens(t) => t.len(),
                _ => 0,
            })
            .sum();
        assert_eq!(total_tokens, 40 * 7);
        assert_eq!(world.neighborhoods[0].id, "c0_n0000");
        assert_eq!(world.neighborhoods[39].id, "c0_n0039");
        assert_eq!(world.neighborhoods[0].city, "c0");
        assert_eq!(world.attributes.names.len(), 6);
        assert_eq!(world.attributes.values.len(), 40);
    }

    #[test]
    fn round_trips_through_polygon_assignment_with_zero_drops() {
        let config = small_config();
        let world = generate(&config).unwrap();
        let all_points: Vec<PointDatum> = world
            .sv_points
            .iter()
            .chain(&world.poi_points)
            .cloned()
            .collect();
        let assignment =
            assign_points(&world.neighborhoods, &all_points, AssignMode::Polygon).unwrap();
        assert_eq!(assignment.dropped, 0);
        let total_sv: usize = assignment
            .containers
            .iter()
            .map(|c| c.streetview_indices.len())
            .sum();
        let total_tokens: usize = assignment
            .containers
            .iter()
            .map(|c| c.poi_tokens.len())
            .sum();
        assert_eq!(total_sv, 40 * 5);
        assert_eq!(total_tokens, 40 * 7);
    }

    #[test]
    fn zero_noise_gives_identical_community_feature_vectors() {
        let config = SynthConfig {
            communities: 2,
            sv_noise: 0.0,
            ..small_config()
        };
        let world = generate(&config).unwrap();
        let sv_per = config.sv_per_neighborhood;
        let mut by_community: Vec<Option<&Vec<f64>>> = vec![None; 2];
        for (p, point) in world.sv_points.iter().enumerate() {
            let community = world.communities[p / sv_per];
            let PointPayload::Features(values) = &point.payload else {
                panic!("street-view points carry features")
            };
            match by_community[community] {
                None => by_community[community] = Some(values),
                Some(expect) => assert_eq!(values, expect),
            }
        }
        assert_ne!(by_community[0].unwrap(), by_community[1].unwrap());
    }

    #[test]
    fn within_community_trips_exceed_cross_community_trips() {
        let config = small_config();
        let world = generate(&config).unwrap();
        // Endpoints are exact centroid copies, so index recovery is exact.
        let find = |p: LonLat| {
            world
                .neighborhoods
                .iter()
                .position(|nb| nb.centroid.lon == p.lon && nb.centroid.lat == p.lat)
                .expect("endpoint matches a centroid")
        };
        let mut within = Vec::new();
        let mut cross = Vec::new();
        for r in &world.relations {
            assert!(r.weight >= 1.0);
            assert_eq!(r.weight.fract(), 0.0, "trip counts are integers");
            let i = find(r.origin);
            let j = find(r.dest);
            if world.communities[i] == world.communities[j] {
                within.push(r.weight);
            } else {
                cross.push(r.weight);
            }
        }
        assert!(!within.is_empty() && !cross.is_empty());
        assert!(mean(&within) > mean(&cross));
    }

    #[test]
    fn true_attributes_are_exactly_linear_in_generative_features() {
        let config = small_config();
        let world = generate(&config).unwrap();
        let k = config.communities;
        // Design: community one-hot (first K-1 to dodge intercept
        // collinearity) plus centroid lon/lat.
        let x: Vec<Vec<f64>> = world
            .neighborhoods
            .iter()
            .zip(&world.communities)
            .map(|(nb, &c)| {
                let mut row = vec![0.0; k - 1];
                if c < k - 1 {
                    row[c] = 1.0;
                }
                row.push(nb.centroid.lon);
                row.push(nb.centroid.lat);
                row
            })
            .collect();
        for a in 0..6 {
            let y: Vec<f64> = world.attributes_true.values.iter().map(|r| r[a]).collect();
            let model = ridge_fit(&x, &y, 1e-10).unwrap();
            let pred = model.predict(&x);
            let r2 = r2_score(&y, &pred).unwrap();
            assert!(r2 > 1.0 - 1e-9, "attr{a}: r2 = {r2}");
        }
    }

    #[test]
    fn noise_bounds_achievable_r2() {
        // In-sample fit with the exact generative features recovers the
        // signal, so R^2 lands at var(signal) / var(signal + noise)
        // = 1 / (1 + sigma^2) up to sampling error.
        let config = SynthConfig {
            neighborhoods: 500,
            seed: 11,
            ..SynthConfig::default()
        };
        let world = generate(&config).unwrap();
        let k = config.communities;
        let x: Vec<Vec<f64>> = world
            .neighborhoods
            .iter()
            .zip(&world.communities)
            .map(|(nb, &c)| {
                let mut row = vec![0.0; k - 1];
                if c < k - 1 {
                    row[c] = 1.0;
                }
                row.push(nb.centroid.lon);
                row.push(nb.centroid.lat);
                row
            })
            .collect();
        let expected = 1.0 / (1.0 + config.attr_noise * config.attr_noise);
        for a in 0..6 {
            let y: Vec<f64> = world.attributes.values.iter().map(|r| r[a]).collect();
            let model = ridge_fit(&x, &y, 1e-10).unwrap();
            let r2 = r2_score(&y, &model.predict(&x)).unwrap();
            assert!(
                (r2 - expected).abs() < 0.05,
                "attr{a}: r2 = {r2}, expected about {expected}"
            );
        }
    }

    #[test]
    fn zero_noise_attributes_equal_truth() {
        let config = SynthConfig {
            attr_noise: 0.0,
            ..small_config()
        };
        let world = generate(&config).unwrap();
        assert_eq!(world.attributes.values, world.attributes_true.values);
        let oracle = world.oracle_attributes();
        assert_eq!(oracle.names[0], "attr0_true");
        assert_eq!(oracle.values, world.attributes_true.values);
    }

    #[test]
    fn deterministic_per_seed_and_distinct_across_seeds() {
        let config = small_config();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.neighborhoods.len(), b.neighborhoods.len());
        for (x, y) in a.neighborhoods.iter().zip(&b.neighborhoods) {
            assert_eq!(x.centroid.lon.to_bits(), y.centroid.lon.to_bits());
            assert_eq!(x.centroid.lat.to_bits(), y.centroid.lat.to_bits());
        }
        assert_eq!(a.attributes.values, b.attributes.values);
        assert_eq!(a.relations.len(), b.relations.len());

        let mut first_centroids = std::collections::BTreeSet::new();
        for seed in 0..10u64 {
            let world = generate(&SynthConfig {
                seed,
                ..small_config()
            })
            .unwrap();
            let c = world.neighborhoods[0].centroid;
            assert!(
                first_centroids.insert((c.lon.to_bits(), c.lat.to_bits())),
                "seed {seed} repeated a world"
            );
        }
    }

    #[test]
    fn multi_city_worlds_stay_disjoint() {
        let config = SynthConfig {
            cities: 3,
            neighborhoods: 12,
            sv_per_neighborhood: 2,
            tokens_per_neighborhood: 3,
            ..SynthConfig::default()
        };
        let world = generate(&config).unwrap();
        assert_eq!(world.neighborhoods.len(), 36);
        assert_eq!(world.neighborhoods[12].id, "c1_n0000");
        assert_eq!(world.neighborhoods[12].city, "c1");
        // Cities sit 20 degrees apart; all trips stay within one city.
        let find = |p: LonLat| {
            world
                .neighborhoods
                .iter()
                .position(|nb| nb.centroid.lon == p.lon && nb.centroid.lat == p.lat)
                .unwrap()
        };
        for r in &world.relations {
            assert_eq!(world.neighborhoods[find(r.origin)].city,
                       world.neighborhoods[find(r.dest)].city);
        }
    }
}
