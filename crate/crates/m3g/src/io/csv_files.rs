//! CSV readers and writers for every dataset and artifact file.
//!
//! Schemas:
//! - neighborhoods: `id,city,lon,lat[,wkt_polygon]` — polygon ring encoded
//!   as `lon lat; lon lat; ...`, empty cell means centroid-only.
//! - points: `modality,lon,lat,payload` — STREETVIEW payload is
//!   semicolon-separated floats, POI payload is whitespace-separated tokens.
//! - relations: `modality,reciprocal,src_lon,src_lat,dst_lon,dst_lat,weight`
//!   or the pre-resolved `modality,reciprocal,src_id,dst_id,weight`.
//! - attributes: `id,<name>...` — empty cell means missing.
//! - embeddings: `id,z_0..z_{d-1}`; history: `epoch,kind,mean_loss,active_fraction`;
//!   report: `attribute,model,metric,mean,std`; pairs: `proximity,embed_dist`;
//!   clusters: `id,cluster`.

use crate::error::{Error, Result};
use crate::eval::downstream::{AttributeTable, DownstreamReport, ReportRow};
use crate::eval::proximity::ProximityResult;
use crate::geo::{LonLat, Modality, Neighborhood, PointDatum, PointPayload, RelationDatum};
use crate::trainer::EpochStats;
use std::path::Path;

fn parse_err(context: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        context: context.to_string(),
        reason: reason.into(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn check_header(context: &str, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_cols: Vec<&str> = got.iter().collect();
    if got_cols != want {
        return Err(parse_err(
            context,
            format!("expected header {}, got {}", want.join(","), got_cols.join(",")),
        ));
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_f64(context: &str, line: u64, field: &str, value: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| {
        parse_err(
            &format!("{context} line {line}"),
            format!("{field} is not a number: {value:?}"),
        )
    })
}

fn parse_finite(context: &str, line: u64, field: &str, value: &str) -> Result<f64> {
    let v = parse_f64(context, line, field, value)?;
    if !v.is_finite() {
        return Err(parse_err(
            &format!("{context} line {line}"),
            format!("{field} must be finite, got {value:?}"),
        ));
    }
    Ok(v)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// --- neighborhoods ---------------------------------------------------------

fn parse_ring(context: &str, line: u64, text: &str) -> Result<Vec<LonLat>> {
    let mut ring = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let coords: Vec<&str> = part.split_whitespace().collect();
        if coords.len() != 2 {
            return Err(parse_err(
                &format!("{context} line {line}"),
                format!("polygon vertex must be `lon lat`, got {part:?}"),
            ));
        }
        let lon = parse_finite(context, line, "polygon lon", coords[0])?;
        let lat = parse_finite(context, line, "polygon lat", coords[1])?;
        ring.push(LonLat::new(lon, lat)?);
    }
    Ok(ring)
}

pub fn parse_neighborhoods_csv(text: &str) -> Result<Vec<Neighborhood>> {
    const CTX: &str = "neighborhoods csv";
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    let has_polygon = match header.len() {
        4 => {
            check_header(CTX, &header, &["id", "city", "lon", "lat"])?;
            false
        }
        _ => {
            check_header(CTX, &header, &["id", "city", "lon", "lat", "wkt_polygon"])?;
            true
        }
    };
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        let city = record[1].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(&format!("{CTX} line {line}"), "empty id"));
        }
        let ring_text = if has_polygon { record[4].trim() } else { "" };
        if ring_text.is_empty() {
            let lon = parse_finite(CTX, line, "lon", &record[2])?;
            let lat = parse_finite(CTX, line, "lat", &record[3])?;
            out.push(Neighborhood::from_centroid(id, city, LonLat::new(lon, lat)?));
        } else {
            // The lon/lat columns are informative for polygon rows; the
            // centroid is always recomputed from the ring.
            let ring = parse_ring(CTX, line, ring_text)?;
            out.push(Neighborhood::from_polygon(id, city, ring)?);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("neighborhoods csv".into()));
    }
    Ok(out)
}

pub fn write_neighborhoods_csv(path: &Path, neighborhoods: &[Neighborhood]) -> Result<()> {
    let mut out = String::from("id,city,lon,lat,wkt_polygon\n");
    for nb in neighborhoods {
        let ring = nb
            .polygon()
            .map(|ring| {
                ring.iter()
                    .map(|v| format!("{} {}", fmt_f64(v.lon), fmt_f64(v.lat)))
                    .collect::<Vec<_>>()
                    .join("; ")
            })
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            nb.id,
            nb.city,
            fmt_f64(nb.centroid.lon),
            fmt_f64(nb.centroid.lat),
            ring
        ));
    }
    write_file(path, &out)
}

// --- points -----------------------------------------------------------------

pub fn parse_points_csv(text: &str) -> Result<Vec<PointDatum>> {
    const CTX: &str = "points csv";
    let mut rdr = reader(text);
    check_header(CTX, rdr.headers()?, &["modality", "lon", "lat", "payload"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let modality = record[0].trim();
        let lon = parse_finite(CTX, line, "lon", &record[1])?;
        let lat = parse_finite(CTX, line, "lat", &record[2])?;
        let location = LonLat::new(lon, lat)?;
        let payload = record[3].trim();
        let point = if modality == Modality::streetview().as_str() {
            let values = payload
                .split(';')
                .map(|v| parse_finite(CTX, line, "feature", v))
                .collect::<Result<Vec<f64>>>()?;
            PointDatum::features(Modality::streetview(), location, values)?
        } else if modality == Modality::poi().as_str() {
            let tokens: Vec<String> =
                payload.split_whitespace().map(|t| t.to_string()).collect();
            PointDatum::tokens(Modality::poi(), location, tokens)?
        } else {
            return Err(parse_err(
                &format!("{CTX} line {line}"),
                format!("unsupported point modality {modality:?}"),
            ));
        };
        out.push(point);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("points csv".into()));
    }
    Ok(out)
}

pub fn write_points_csv(path: &Path, points: &[PointDatum]) -> Result<()> {
    let mut out = String::from("modality,lon,lat,payload\n");
    for p in points {
        let payload = match &p.payload {
            PointPayload::Features(values) => values
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(";"),
            PointPayload::Tokens(tokens) => tokens.join(" "),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.modality,
            fmt_f64(p.location.lon),
            fmt_f64(p.location.lat),
            payload
        ));
    }
    write_file(path, &out)
}

// --- relations ---------------------------------------------------------------

/// A relation whose endpoints are already neighborhood ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRelation {
    pub modality: Modality,
    pub reciprocal: bool,
    pub src_id: String,
    pub dst_id: String,
    pub weight: f64,
}

/// Relations arrive either with raw coordinates or pre-resolved ids; the
/// header decides which.
#[derive(Debug, Clone)]
pub enum RelationsFile {
    Located(Vec<RelationDatum>),
    Resolved(Vec<ResolvedRelation>),
}

fn parse_reciprocal(context: &str, line: u64, value: &str) -> Result<bool> {
    match value.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(
            &format!("{context} line {line}"),
            format!("reciprocal must be 0 or 1, got {other:?}"),
        )),
    }
}

pub fn parse_relations_csv(text: &str) -> Result<RelationsFile> {
    const CTX: &str = "relations csv";
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    let located = match header.len() {
        7 => {
            check_header(
                CTX,
                &header,
                &["modality", "reciprocal", "src_lon", "src_lat", "dst_lon", "dst_lat", "weight"],
            )?;
            true
        }
        _ => {
            check_header(
                CTX,
                &header,
                &["modality", "reciprocal", "src_id", "dst_id", "weight"],
            )?;
            false
        }
    };
    if located {
        let mut out = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record_line(&record);
            let modality = Modality::new(record[0].trim());
            let reciprocal = parse_reciprocal(CTX, line, &record[1])?;
            let src = LonLat::new(
                parse_finite(CTX, line, "src_lon", &record[2])?,
                parse_finite(CTX, line, "src_lat", &record[3])?,
            )?;
            let dst = LonLat::new(
                parse_finite(CTX, line, "dst_lon", &record[4])?,
                parse_finite(CTX, line, "dst_lat", &record[5])?,
            )?;
            let weight = parse_finite(CTX, line, "weight", &record[6])?;
            out.push(RelationDatum::new(modality, weight, src, dst, reciprocal)?);
        }
        if out.is_empty() {
            return Err(Error::EmptyInput("relations csv".into()));
        }
        Ok(RelationsFile::Located(out))
    } else {
        let mut out = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record_line(&record);
            let weight = parse_finite(CTX, line, "weight", &record[4])?;
            if weight < 0.0 {
                return Err(parse_err(
                    &format!("{CTX} line {line}"),
                    format!("weight must be non-negative, got {weight}"),
                ));
            }
            let src_id = record[2].trim().to_string();
            let dst_id = record[3].trim().to_string();
            if src_id.is_empty() || dst_id.is_empty() {
                return Err(parse_err(&format!("{CTX} line {line}"), "empty endpoint id"));
            }
            out.push(ResolvedRelation {
                modality: Modality::new(record[0].trim()),
                reciprocal: parse_reciprocal(CTX, line, &record[1])?,
                src_id,
                dst_id,
                weight,
            });
        }
        if out.is_empty() {
            return Err(Error::EmptyInput("relations csv".into()));
        }
        Ok(RelationsFile::Resolved(out))
    }
}

pub fn write_relations_csv(path: &Path, relations: &[RelationDatum]) -> Result<()> {
    let mut out =
        String::from("modality,reciprocal,src_lon,src_lat,dst_lon,dst_lat,weight\n");
    for r in relations {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.modality,
            if r.reciprocal { 1 } else { 0 },
            fmt_f64(r.origin.lon),
            fmt_f64(r.origin.lat),
            fmt_f64(r.dest.lon),
            fmt_f64(r.dest.lat),
            fmt_f64(r.weight)
        ));
    }
    write_file(path, &out)
}

/// The 5-column pre-resolved form of the relations schema.
pub fn write_resolved_relations_csv(path: &Path, relations: &[ResolvedRelation]) -> Result<()> {
    let mut out = String::from("modality,reciprocal,src_id,dst_id,weight\n");
    for r in relations {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.modality,
            if r.reciprocal { 1 } else { 0 },
            r.src_id,
            r.dst_id,
            fmt_f64(r.weight)
        ));
    }
    write_file(path, &out)
}

// --- attributes ---------------------------------------------------------------

pub fn parse_attributes_csv(text: &str) -> Result<AttributeTable> {
    const CTX: &str = "attributes csv";
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0) != Some("id") {
        return Err(parse_err(
            CTX,
            "header must be `id` followed by at least one attribute name",
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(&format!("{CTX} line {line}"), "empty id"));
        }
        let mut row = Vec::with_capacity(names.len());
        for (name, cell) in names.iter().zip(record.iter().skip(1)) {
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(f64::NAN);
            } else {
                let v = parse_f64(CTX, line, name, cell)?;
                if v.is_infinite() {
                    return Err(parse_err(
                        &format!("{CTX} line {line}"),
                        format!("{name} must be finite or empty"),
                    ));
                }
                row.push(v);
            }
        }
        ids.push(id);
        values.push(row);
    }
    AttributeTable::new(ids, names, values)
}

pub fn write_attributes_csv(path: &Path, table: &AttributeTable) -> Result<()> {
    let mut out = String::from("id");
    for name in &table.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (id, row) in table.ids.iter().zip(&table.values) {
        out.push_str(id);
        for v in row {
            out.push(',');
            if v.is_finite() {
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    write_file(path, &out)
}

// --- embeddings ----------------------------------------------------------------

pub fn parse_embeddings_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    const CTX: &str = "embeddings csv";
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0) != Some("id") {
        return Err(parse_err(CTX, "header must be id,z_0,..."));
    }
    for (i, col) in header.iter().skip(1).enumerate() {
        if col != format!("z_{i}") {
            return Err(parse_err(
                CTX,
                format!("column {} must be z_{i}, got {col:?}", i + 1),
            ));
        }
    }
    let d = header.len() - 1;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(&format!("{CTX} line {line}"), "empty id"));
        }
        let mut row = Vec::with_capacity(d);
        for cell in record.iter().skip(1) {
            row.push(parse_finite(CTX, line, "embedding entry", cell)?);
        }
        ids.push(id);
        rows.push(row);
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput("embeddings csv".into()));
    }
    Ok((ids, rows))
}

pub fn write_embeddings_csv(path: &Path, ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if ids.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: rows.len(),
        });
    }
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = String::from("id");
    for i in 0..d {
        out.push_str(&format!(",z_{i}"));
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        out.push_str(id);
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

// --- loss history -----------------------------------------------------------

/// A parsed loss-history row; `kind` stays a plain string on read.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub kind: String,
    pub mean_loss: f64,
    pub active_fraction: f64,
}

pub fn parse_history_csv(text: &str) -> Result<Vec<HistoryRow>> {
    const CTX: &str = "history csv";
    let mut rdr = reader(text);
    check_header(
        CTX,
        rdr.headers()?,
        &["epoch", "kind", "mean_loss", "active_fraction"],
    )?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let epoch = record[0].trim().parse::<usize>().map_err(|_| {
            parse_err(
                &format!("{CTX} line {line}"),
                format!("epoch is not an integer: {:?}", &record[0]),
            )
        })?;
        out.push(HistoryRow {
            epoch,
            kind: record[1].trim().to_string(),
            mean_loss: parse_finite(CTX, line, "mean_loss", &record[2])?,
            active_fraction: parse_finite(CTX, line, "active_fraction", &record[3])?,
        });
    }
    Ok(out)
}

pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,kind,mean_loss,active_fraction\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch,
            row.kind,
            fmt_f64(row.mean_loss),
            fmt_f64(row.active_fraction)
        ));
    }
    write_file(path, &out)
}

// --- evaluation report --------------------------------------------------------

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    const CTX: &str = "report csv";
    let mut rdr = reader(text);
    check_header(
        CTX,
        rdr.headers()?,
        &["attribute", "model", "metric", "mean", "std"],
    )?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        out.push(ReportRow {
            attribute: record[0].trim().to_string(),
            model: record[1].trim().to_string(),
            metric: record[2].trim().to_string(),
            mean: parse_finite(CTX, line, "mean", &record[3])?,
            std: parse_finite(CTX, line, "std", &record[4])?,
        });
    }
    Ok(out)
}

pub fn write_report_csv(path: &Path, report: &DownstreamReport) -> Result<()> {
    let mut out = String::from("attribute,model,metric,mean,std\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.attribute,
            row.model,
            row.metric,
            fmt_f64(row.mean),
            fmt_f64(row.std)
        ));
    }
    write_file(path, &out)
}

// --- proximity pairs ------------------------------------------------------------

pub fn parse_pairs_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    const CTX: &str = "pairs csv";
    let mut rdr = reader(text);
    check_header(CTX, rdr.headers()?, &["proximity", "embed_dist"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        out.push((
            parse_finite(CTX, line, "proximity", &record[0])?,
            parse_finite(CTX, line, "embed_dist", &record[1])?,
        ));
    }
    Ok(out)
}

pub fn write_pairs_csv(path: &Path, result: &ProximityResult) -> Result<()> {
    let mut out = String::from("proximity,embed_dist\n");
    for pair in &result.pairs {
        out.push_str(&format!(
            "{},{}\n",
            fmt_f64(pair.ground),
            fmt_f64(pair.embedding_distance)
        ));
    }
    write_file(path, &out)
}

// --- cluster labels ---------------------------------------------------------------

pub fn parse_clusters_csv(text: &str) -> Result<Vec<(String, usize)>> {
    const CTX: &str = "clusters csv";
    let mut rdr = reader(text);
    check_header(CTX, rdr.headers()?, &["id", "cluster"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(&format!("{CTX} line {line}"), "empty id"));
        }
        let cluster = record[1].trim().parse::<usize>().map_err(|_| {
            parse_err(
                &format!("{CTX} line {line}"),
                format!("cluster is not an integer: {:?}", &record[1]),
            )
        })?;
        out.push((id, cluster));
    }
    Ok(out)
}

pub fn write_clusters_csv(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: labels.len(),
        });
    }
    let mut out = String::from("id,cluster\n");
    for (id, label) in ids.iter().zip(labels) {
        out.push_str(&format!("{id},{label}\n"));
    }
    write_file(path, &out)
}
