//! Neighborhood geometry, geotagged data records, and the assignment of
//! point data to neighborhood containers.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A data-modality tag. Stored as an upper-case-by-convention string so new
/// modalities can be added through data files without code changes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Modality(String);

impl Modality {
    pub fn new(tag: impl Into<String>) -> Self {
        Modality(tag.into())
    }
    pub fn streetview() -> Self {
        Modality::new("STREETVIEW")
    }
    pub fn poi() -> Self {
        Modality::new("POI")
    }
    pub fn dist() -> Self {
        Modality::new("DIST")
    }
    pub fn mob() -> Self {
        Modality::new("MOB")
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !(lon.is_finite() && lat.is_finite())
            || !(-180.0..=180.0).contains(&lon)
            || !(-90.0..=90.0).contains(&lat)
        {
            return Err(Error::InvalidCoordinate { lon, lat });
        }
        Ok(LonLat { lon, lat })
    }
}

/// Great-circle distance in kilometers between two lon/lat points,
/// using the haversine formula with a spherical Earth of radius
/// [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: LonLat, b: LonLat) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Geometry of a neighborhood: either a simple polygon ring or a bare
/// centroid.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Ordered ring of vertices, implicitly closed. Must be simple
    /// (non-self-intersecting) with at least 3 vertices.
    Polygon(Vec<LonLat>),
    Centroid(LonLat),
}

/// A geographic unit carrying a learnable embedding.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub id: String,
    pub city: String,
    pub geometry: Geometry,
    /// Equal to the bare centroid, or derived from the polygon ring by the
    /// shoelace formula.
    pub centroid: LonLat,
}

impl Neighborhood {
    pub fn from_centroid(
        id: impl Into<String>,
        city: impl Into<String>,
        centroid: LonLat,
    ) -> Self {
        Neighborhood {
            id: id.into(),
            city: city.into(),
            geometry: Geometry::Centroid(centroid),
            centroid,
        }
    }

    /// Build a polygonal neighborhood, validating the ring and deriving its
    /// centroid. A trailing vertex equal to the first is tolerated and
    /// dropped.
    pub fn from_polygon(
        id: impl Into<String>,
        city: impl Into<String>,
        mut ring: Vec<LonLat>,
    ) -> Result<Self> {
        let id = id.into();
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        validate_ring(&id, &ring)?;
        let centroid = ring_centroid(&ring).ok_or_else(|| Error::InvalidPolygon {
            id: id.clone(),
            reason: "zero signed area".into(),
        })?;
        Ok(Neighborhood {
            id,
            city: city.into(),
            geometry: Geometry::Polygon(ring),
            centroid,
        })
    }

    pub fn polygon(&self) -> Option<&[LonLat]> {
        match &self.geometry {
            Geometry::Polygon(ring) => Some(ring),
            Geometry::Centroid(_) => None,
        }
    }
}

fn validate_ring(id: &str, ring: &[LonLat]) -> Result<()> {
    if ring.len() < 3 {
        return Err(Error::InvalidPolygon {
            id: id.to_string(),
            reason: format!("ring has {} vertices, need at least 3", ring.len()),
        });
    }
    let n = ring.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip segment pairs sharing a ring vertex (adjacent segments).
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a1, a2) = (ring[i], ring[(i + 1) % n]);
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return Err(Error::InvalidPolygon {
                    id: id.to_string(),
                    reason: format!("segments {i} and {j} intersect"),
                });
            }
        }
    }
    Ok(())
}

fn cross(o: LonLat, a: LonLat, b: LonLat) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn on_segment(p: LonLat, a: LonLat, b: LonLat) -> bool {
    cross(a, b, p) == 0.0
        && p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

/// Whether closed segments [a1,a2] and [b1,b2] share any point.
fn segments_intersect(a1: LonLat, a2: LonLat, b1: LonLat, b2: LonLat) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a1, b1, b2))
        || (d2 == 0.0 && on_segment(a2, b1, b2))
        || (d3 == 0.0 && on_segment(b1, a1, a2))
        || (d4 == 0.0 && on_segment(b2, a1, a2))
}

/// Area centroid of a simple ring via the shoelace formula. Returns `None`
/// when the signed area is zero (degenerate ring).
fn ring_centroid(ring: &[LonLat]) -> Option<LonLat> {
    let n = ring.len();
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let w = p.lon * q.lat - q.lon * p.lat;
        area2 += w;
        cx += (p.lon + q.lon) * w;
        cy += (p.lat + q.lat) * w;
    }
    if area2 == 0.0 {
        return None;
    }
    Some(LonLat {
        lon: cx / (3.0 * area2),
        lat: cy / (3.0 * area2),
    })
}

/// Even-odd ray-casting containment test with the ray cast toward +lon.
/// Points exactly on a ring segment count as inside.
pub fn point_in_ring(p: LonLat, ring: &[LonLat]) -> bool {
    let n = ring.len();
    for i in 0..n {
        if on_segment(p, ring[i], ring[(i + 1) % n]) {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x_hit = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x_hit {
                inside = !inside;
            }
        }
    }
    inside
}

/// Payload of a geotagged point observation.
#[derive(Debug, Clone, PartialEq)]
pub enum PointPayload {
    /// Dense feature vector (street-view-like modalities).
    Features(Vec<f64>),
    /// Non-empty bag of tokens (POI-like modalities).
    Tokens(Vec<String>),
}

/// A single geotagged observation assigned to exactly one neighborhood
/// container.
#[derive(Debug, Clone)]
pub struct PointDatum {
    pub modality: Modality,
    pub location: LonLat,
    pub payload: PointPayload,
}

impl PointDatum {
    pub fn features(modality: Modality, location: LonLat, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("feature vector".into()));
        }
        Ok(PointDatum {
            modality,
            location,
            payload: PointPayload::Features(values),
        })
    }

    pub fn tokens(modality: Modality, location: LonLat, tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("token bag".into()));
        }
        Ok(PointDatum {
            modality,
            location,
            payload: PointPayload::Tokens(tokens),
        })
    }
}

/// A weighted pair-of-locations record. Reciprocal records are stored once
/// and expanded to both directions when the graph is built.
#[derive(Debug, Clone)]
pub struct RelationDatum {
    pub modality: Modality,
    pub weight: f64,
    pub origin: LonLat,
    pub dest: LonLat,
    pub reciprocal: bool,
}

impl RelationDatum {
    pub fn new(
        modality: Modality,
        weight: f64,
        origin: LonLat,
        dest: LonLat,
        reciprocal: bool,
    ) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "relation weight must be finite and non-negative, got {weight}"
            )));
        }
        Ok(RelationDatum {
            modality,
            weight,
            origin,
            dest,
            reciprocal,
        })
    }
}

/// Per-neighborhood bags of intra-neighborhood data.
#[derive(Debug, Clone, Default)]
pub struct Container {
    pub neighborhood_id: String,
    /// Indices into the dataset's feature-payload point list, in input order.
    pub streetview_indices: Vec<usize>,
    /// Flattened token multiset in input order (repeats preserved).
    pub poi_tokens: Vec<String>,
}

/// How point and relation endpoints resolve to neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    /// First polygon (in neighborhood input order) containing the point.
    Polygon,
    /// Neighborhood with minimal haversine distance to its centroid;
    /// ties go to the lexicographically smaller id.
    NearestCentroid,
}

/// Result of assigning points to containers.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// One container per neighborhood, in neighborhood order.
    pub containers: Vec<Container>,
    /// Feature points falling in no polygon (polygon mode only).
    pub dropped: usize,
    /// Feature dimensionality shared by all feature payloads, if any exist.
    pub feature_dim: Option<usize>,
}

/// Resolve a location to a neighborhood index, or `None` when the point is
/// covered by no polygon.
pub fn resolve_location(
    neighborhoods: &[Neighborhood],
    p: LonLat,
    mode: AssignMode,
) -> Result<Option<usize>> {
    match mode {
        AssignMode::Polygon => {
            for (i, nb) in neighborhoods.iter().enumerate() {
                let ring = nb
                    .polygon()
                    .ok_or_else(|| Error::MissingPolygon(nb.id.clone()))?;
                if point_in_ring(p, ring) {
                    return Ok(Some(i));
                }
            }
            Ok(None)
        }
        AssignMode::NearestCentroid => {
            let mut best: Option<(f64, usize)> = None;
            for (i, nb) in neighborhoods.iter().enumerate() {
                let d = haversine_km(p, nb.centroid);
                let better = match best {
                    None => true,
                    Some((bd, bi)) => d < bd || (d == bd && nb.id < neighborhoods[bi].id),
                };
                if better {
                    best = Some((d, i));
                }
            }
            Ok(best.map(|(_, i)| i))
        }
    }
}

/// Assign each point to a neighborhood container.
///
/// Polygon mode requires every neighborhood to carry a polygon; points
/// covered by no polygon are dropped and counted. Nearest-centroid mode
/// always assigns.
pub fn assign_points(
    neighborhoods: &[Neighborhood],
    points: &[PointDatum],
    mode: AssignMode,
) -> Result<Assignment> {
    if neighborhoods.is_empty() {
        return Err(Error::EmptyInput("neighborhood list".into()));
    }
    let mut ids = BTreeSet::new();
    for nb in neighborhoods {
        if !ids.insert(nb.id.as_str()) {
            return Err(Error::DuplicateId(nb.id.clone()));
        }
    }

    let mut containers: Vec<Container> = neighborhoods
        .iter()
        .map(|nb| Container {
            neighborhood_id: nb.id.clone(),
            ..Container::default()
        })
        .collect();
    let mut dropped = 0usize;
    let mut feature_dim: Option<usize> = None;
    let mut feature_index = 0usize;

    for point in points {
        let slot = resolve_location(neighborhoods, point.location, mode)?;
        match &point.payload {
            PointPayload::Features(values) => {
                match feature_dim {
                    None => feature_dim = Some(values.len()),
                    Some(dim) if dim != values.len() => {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: values.len(),
                        });
                    }
                    Some(_) => {}
                }
                match slot {
                    Some(i) => containers[i].streetview_indices.push(feature_index),
                    None => dropped += 1,
                }
                feature_index += 1;
            }
            PointPayload::Tokens(tokens) => match slot {
                Some(i) => containers[i].poi_tokens.extend(tokens.iter().cloned()),
                None => dropped += 1,
            },
        }
    }

    Ok(Assignment {
        containers,
        dropped,
        feature_dim,
    })
}

/// Per-neighborhood data counts plus global totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainersReport {
    /// `(neighborhood_id, street-view count, token count)` per container.
    pub rows: Vec<(String, usize, usize)>,
    pub total_streetviews: usize,
    pub total_tokens: usize,
}

pub fn build_containers_report(containers: &[Container]) -> ContainersReport {
    let rows: Vec<(String, usize, usize)> = containers
        .iter()
        .map(|c| {
            (
                c.neighborhood_id.clone(),
                c.streetview_indices.len(),
                c.poi_tokens.len(),
            )
        })
        .collect();
    let total_streetviews = rows.iter().map(|r| r.1).sum();
    let total_tokens = rows.iter().map(|r| r.2).sum();
    ContainersReport {
        rows,
        total_streetviews,
        total_tokens,
    }
}
