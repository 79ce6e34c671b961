//! End-to-end orchestration: data directories on disk, training runs,
//! evaluation artifacts, and multi-city merging.
//!
//! A data directory holds `neighborhoods.csv` (required) plus optional
//! `points.csv`, `relations.csv`, `attributes.csv`, `attributes_true.csv`.
//! Commands write their outputs next to a `manifest.json` recording the
//! config snapshot, input digests, artifact digests, and wall-clock time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::encoder::WordEncoder;
use crate::error::{Error, Result};
use crate::eval::{
    downstream_eval, kmeans, proximity_probe, AttributeTable, DownstreamReport,
};
use crate::geo::{
    assign_points, resolve_location, AssignMode, Container, LonLat, Modality, Neighborhood,
    PointDatum, PointPayload, RelationDatum,
};
use crate::graph::{build_dist_records, default_dist_pairing, EdgeRecord, Multigraph};
use crate::io::{
    eval_settings_kv, parse_attributes_csv, parse_embeddings_csv, parse_neighborhoods_csv,
    parse_points_csv, parse_relations_csv, parse_word_vectors, sha256_hex_file,
    synth_config_kv, train_config_kv, write_attributes_csv, write_clusters_csv,
    write_embeddings_csv, write_history_csv, write_neighborhoods_csv, write_pairs_csv,
    write_points_csv, write_relations_csv, write_report_csv, EvalSettings, Manifest,
    RelationsFile, ResolvedRelation,
};
use crate::seeding::{derive_seed, rng_for};
use crate::synth::{generate, SynthConfig, SynthWorld};
use crate::trainer::{run_training, TrainConfig, TrainData, TrainState};

pub const NEIGHBORHOODS_FILE: &str = "neighborhoods.csv";
pub const POINTS_FILE: &str = "points.csv";
pub const RELATIONS_FILE: &str = "relations.csv";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const ATTRIBUTES_TRUE_FILE: &str = "attributes_true.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The files that make up an ingestible data directory, in a fixed order.
const DATA_FILES: [&str; 5] = [
    NEIGHBORHOODS_FILE,
    POINTS_FILE,
    RELATIONS_FILE,
    ATTRIBUTES_FILE,
    ATTRIBUTES_TRUE_FILE,
];

/// Output file for one modality's proximity probe.
pub fn proximity_file(modality: &Modality) -> String {
    format!("proximity_{}.csv", modality.as_str().to_ascii_lowercase())
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

// --- data directories ----------------------------------------------------

/// An ingested data directory: geometry, per-neighborhood containers, and
/// the edge layers present in the relations file. The DIST layer is derived
/// from centroids on demand (see [`ensure_dist_layer`]), never stored.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub neighborhoods: Vec<Neighborhood>,
    /// Street-view feature payloads in file order; containers index into it.
    pub features: Vec<Vec<f64>>,
    pub containers: Vec<Container>,
    pub graph: Multigraph,
    /// Points falling in no polygon (polygon mode only).
    pub dropped_points: usize,
    /// Located relations with an endpoint resolving nowhere.
    pub dropped_relations: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn centroids(&self) -> Vec<LonLat> {
        self.neighborhoods.iter().map(|nb| nb.centroid).collect()
    }
}

/// Ingest a data directory. Points and relations are optional; assignment
/// uses polygons when every neighborhood has one, nearest centroids
/// otherwise. Relation endpoints resolve under the same mode.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let neighborhoods = parse_neighborhoods_csv(&read_file(&dir.join(NEIGHBORHOODS_FILE))?)?;
    let points = match read_optional(&dir.join(POINTS_FILE))? {
        Some(text) => parse_points_csv(&text)?,
        None => Vec::new(),
    };
    let mode = if neighborhoods.iter().all(|nb| nb.polygon().is_some()) {
        AssignMode::Polygon
    } else {
        AssignMode::NearestCentroid
    };
    let assignment = assign_points(&neighborhoods, &points, mode)?;
    let features: Vec<Vec<f64>> = points
        .iter()
        .filter_map(|p| match &p.payload {
            PointPayload::Features(values) => Some(values.clone()),
            PointPayload::Tokens(_) => None,
        })
        .collect();

    let mut graph = Multigraph::new(neighborhoods.iter().map(|nb| nb.id.clone()).collect())?;
    let mut dropped_relations = 0usize;
    let mut by_modality: BTreeMap<Modality, Vec<EdgeRecord>> = BTreeMap::new();
    match read_optional(&dir.join(RELATIONS_FILE))? {
        Some(text) => match parse_relations_csv(&text)? {
            RelationsFile::Located(data) => {
                for r in &data {
                    let src = resolve_location(&neighborhoods, r.origin, mode)?;
                    let dst = resolve_location(&neighborhoods, r.dest, mode)?;
                    match (src, dst) {
                        (Some(s), Some(d)) => by_modality
                            .entry(r.modality.clone())
                            .or_default()
                            .push(EdgeRecord {
                                src: s,
                                dst: d,
                                weight: r.weight,
                                reciprocal: r.reciprocal,
                            }),
                        _ => dropped_relations += 1,
                    }
                }
            }
            RelationsFile::Resolved(data) => {
                for r in &data {
                    let src = lookup_id(&graph, &r.src_id)?;
                    let dst = lookup_id(&graph, &r.dst_id)?;
                    by_modality
                        .entry(r.modality.clone())
                        .or_default()
                        .push(EdgeRecord {
                            src,
                            dst,
                            weight: r.weight,
                            reciprocal: r.reciprocal,
                        });
                }
            }
        },
        None => {}
    }
    for (modality, records) in &by_modality {
        graph.add_layer(modality.clone(), records)?;
    }

    Ok(Dataset {
        neighborhoods,
        features,
        containers: assignment.containers,
        graph,
        dropped_points: assignment.dropped,
        dropped_relations,
    })
}

fn lookup_id(graph: &Multigraph, id: &str) -> Result<usize> {
    graph.index_of(id).ok_or_else(|| {
        Error::InvalidArgument(format!("relation references unknown neighborhood id {id:?}"))
    })
}

/// Derive the DIST layer from centroids unless the relations file already
/// provided one. Pairs are built within each city only: spatial-proximity
/// edges never cross cities, so a merged dataset gets one block per city.
pub fn ensure_dist_layer(dataset: &mut Dataset) -> Result<()> {
    let dist = Modality::dist();
    if dataset.graph.has_layer(&dist) {
        return Ok(());
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, nb) in dataset.neighborhoods.iter().enumerate() {
        groups.entry(nb.city.as_str()).or_default().push(i);
    }
    let mut records = Vec::new();
    for indices in groups.values() {
        let group: Vec<Neighborhood> = indices
            .iter()
            .map(|&i| dataset.neighborhoods[i].clone())
            .collect();
        for rec in build_dist_records(&group, default_dist_pairing(group.len()))? {
            records.push(EdgeRecord {
                src: indices[rec.src],
                dst: indices[rec.dst],
                ..rec
            });
        }
    }
    dataset.graph.add_layer(dist, &records)?;
    Ok(())
}

// --- training -------------------------------------------------------------

/// Ids in graph order plus the trained state.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub ids: Vec<String>,
    pub state: TrainState,
}

/// Wire a dataset into the trainer: containers become intra-neighborhood
/// item lists, POI tokens build the vocabulary (optionally seeded from a
/// pretrained vector file), and the DIST layer is derived when configured.
pub fn train_dataset(
    dataset: &mut Dataset,
    config: &TrainConfig,
    pretrained: &[(String, Vec<f64>)],
) -> Result<TrainOutput> {
    config.validate()?;
    if config.edge_modalities.contains(&Modality::dist()) {
        ensure_dist_layer(dataset)?;
    }
    let sv_items: Vec<Vec<usize>> = dataset
        .containers
        .iter()
        .map(|c| c.streetview_indices.clone())
        .collect();
    let corpus: Vec<&str> = dataset
        .containers
        .iter()
        .flat_map(|c| c.poi_tokens.iter().map(|t| t.as_str()))
        .collect();
    let word_encoder = if corpus.is_empty() {
        None
    } else {
        Some(WordEncoder::with_pretrained(
            corpus,
            pretrained,
            config.d,
            derive_seed(config.seed, "init-words"),
            config.init_scale,
        )?)
    };
    let token_items: Vec<Vec<usize>> = match &word_encoder {
        Some(enc) => dataset
            .containers
            .iter()
            .map(|c| c.poi_tokens.iter().map(|t| enc.token_id(t)).collect())
            .collect::<Result<Vec<_>>>()?,
        None => vec![Vec::new(); dataset.containers.len()],
    };
    let data = TrainData {
        graph: &dataset.graph,
        features: &dataset.features,
        sv_items: &sv_items,
        token_items: &token_items,
    };
    let state = run_training(&data, word_encoder, config)?;
    Ok(TrainOutput {
        ids: dataset.graph.ids().to_vec(),
        state,
    })
}

// --- commands ---------------------------------------------------------------

/// Write a generated world as an ingestible data directory. Sections with
/// no records (points, relations) are omitted rather than written empty.
pub fn write_world(world: &SynthWorld, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_neighborhoods_csv(&dir.join(NEIGHBORHOODS_FILE), &world.neighborhoods)?;
    let mut points = world.sv_points.clone();
    points.extend(world.poi_points.iter().cloned());
    if !points.is_empty() {
        write_points_csv(&dir.join(POINTS_FILE), &points)?;
    }
    if !world.relations.is_empty() {
        write_relations_csv(&dir.join(RELATIONS_FILE), &world.relations)?;
    }
    write_attributes_csv(&dir.join(ATTRIBUTES_FILE), &world.attributes)?;
    write_attributes_csv(&dir.join(ATTRIBUTES_TRUE_FILE), &world.oracle_attributes())?;
    Ok(())
}

fn digest_artifacts(manifest: &mut Manifest, dir: &Path, names: &[&str]) -> Result<()> {
    for name in names {
        let path = dir.join(name);
        if path.exists() {
            manifest.set_str(&format!("artifact.{name}"), sha256_hex_file(&path)?);
        }
    }
    Ok(())
}

fn digest_inputs(manifest: &mut Manifest, dir: &Path) -> Result<()> {
    for name in DATA_FILES {
        let path = dir.join(name);
        if path.exists() {
            manifest.set_str(&format!("input.{name}"), sha256_hex_file(&path)?);
        }
    }
    Ok(())
}

fn finish_manifest(mut manifest: Manifest, out_dir: &Path, start: Instant) -> Result<Manifest> {
    manifest.set_str("out_dir", out_dir.display().to_string());
    manifest.set_u64("wall_ms", start.elapsed().as_millis() as u64);
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Generate the synthetic world and write it plus a manifest.
pub fn cmd_synth(config: &SynthConfig, out_dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let world = generate(config)?;
    write_world(&world, out_dir)?;
    let mut manifest = Manifest::new("synth");
    for (key, value) in synth_config_kv(config) {
        manifest.set_str(&format!("config.{key}"), value);
    }
    digest_artifacts(&mut manifest, out_dir, &DATA_FILES)?;
    finish_manifest(manifest, out_dir, start)
}

/// Train on a data directory and export embeddings plus loss history.
pub fn cmd_train(
    data_dir: &Path,
    config: &TrainConfig,
    word_vectors: Option<&Path>,
    out_dir: &Path,
) -> Result<Manifest> {
    let start = Instant::now();
    let mut dataset = load_dataset(data_dir)?;
    let pretrained = match word_vectors {
        Some(path) => parse_word_vectors(&read_file(path)?)?,
        None => Vec::new(),
    };
    let output = train_dataset(&mut dataset, config, &pretrained)?;
    create_dir(out_dir)?;
    write_embeddings_csv(
        &out_dir.join(EMBEDDINGS_FILE),
        &output.ids,
        output.state.embeddings.rows(),
    )?;
    write_history_csv(&out_dir.join(HISTORY_FILE), &output.state.history)?;

    let mut manifest = Manifest::new("train");
    manifest.set_str("data_dir", data_dir.display().to_string());
    digest_inputs(&mut manifest, data_dir)?;
    if let Some(path) = word_vectors {
        manifest.set_str("input.word_vectors", sha256_hex_file(path)?);
    }
    for (key, value) in train_config_kv(config) {
        manifest.set_str(&format!("config.{key}"), value);
    }
    manifest.set_usize("stat.dropped_points", dataset.dropped_points);
    manifest.set_usize("stat.dropped_relations", dataset.dropped_relations);
    manifest.set_usize("stat.skipped_degenerate", output.state.skipped_degenerate);
    digest_artifacts(&mut manifest, out_dir, &[EMBEDDINGS_FILE, HISTORY_FILE])?;
    finish_manifest(manifest, out_dir, start)
}

fn align_embeddings(
    graph: &Multigraph,
    ids: &[String],
    rows: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let by_id: HashMap<&str, &Vec<f64>> = ids.iter().map(|s| s.as_str()).zip(rows).collect();
    graph
        .ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|row| (*row).clone())
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("no embedding for neighborhood {id:?}"))
                })
        })
        .collect()
}

fn filter_attributes(attrs: &AttributeTable, keep: &BTreeSet<&str>) -> Result<AttributeTable> {
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (id, row) in attrs.ids.iter().zip(&attrs.values) {
        if keep.contains(id.as_str()) {
            ids.push(id.clone());
            values.push(row.clone());
        }
    }
    AttributeTable::new(ids, attrs.names.clone(), values)
}

/// Run the downstream protocol and export report, cluster labels, and one
/// proximity-pair file per graph layer. `city_tag` restricts the run to one
/// city's neighborhoods and emits the regression report only — cluster and
/// proximity structure are properties of the whole graph.
pub fn cmd_eval(
    data_dir: &Path,
    embeddings_path: &Path,
    attributes_path: &Path,
    settings: &EvalSettings,
    city_tag: Option<&str>,
    out_dir: &Path,
) -> Result<Manifest> {
    let start = Instant::now();
    let mut dataset = load_dataset(data_dir)?;
    ensure_dist_layer(&mut dataset)?;
    let (ids, rows) = parse_embeddings_csv(&read_file(embeddings_path)?)?;
    let attrs = parse_attributes_csv(&read_file(attributes_path)?)?;
    create_dir(out_dir)?;

    let mut manifest = Manifest::new("eval");
    manifest.set_str("data_dir", data_dir.display().to_string());
    digest_inputs(&mut manifest, data_dir)?;
    manifest.set_str("input.embeddings", sha256_hex_file(embeddings_path)?);
    manifest.set_str("input.attributes", sha256_hex_file(attributes_path)?);
    for (key, value) in eval_settings_kv(settings) {
        manifest.set_str(&format!("config.{key}"), value);
    }

    let mut artifacts = vec![REPORT_FILE.to_string()];
    let report: DownstreamReport;
    match city_tag {
        Some(tag) => {
            manifest.set_str("config.city_tag", tag);
            let keep: BTreeSet<&str> = dataset
                .neighborhoods
                .iter()
                .filter(|nb| nb.city == tag)
                .map(|nb| nb.id.as_str())
                .collect();
            if keep.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no neighborhoods with city tag {tag:?}"
                )));
            }
            let (f_ids, f_rows): (Vec<String>, Vec<Vec<f64>>) = ids
                .iter()
                .zip(&rows)
                .filter(|(id, _)| keep.contains(id.as_str()))
                .map(|(id, row)| (id.clone(), row.clone()))
                .unzip();
            let f_attrs = filter_attributes(&attrs, &keep)?;
            report = downstream_eval(&f_ids, &f_rows, &f_attrs, &settings.downstream)?;
            write_report_csv(&out_dir.join(REPORT_FILE), &report)?;
        }
        None => {
            report = downstream_eval(&ids, &rows, &attrs, &settings.downstream)?;
            write_report_csv(&out_dir.join(REPORT_FILE), &report)?;

            let mut rng = rng_for(settings.downstream.seed, "eval-kmeans");
            let km = kmeans(&rows, settings.clusters, &mut rng)?;
            write_clusters_csv(&out_dir.join(CLUSTERS_FILE), &ids, &km.labels)?;
            artifacts.push(CLUSTERS_FILE.to_string());

            let aligned = align_embeddings(&dataset.graph, &ids, &rows)?;
            let centroids = dataset.centroids();
            let modalities: Vec<Modality> = dataset.graph.modalities().cloned().collect();
            for modality in &modalities {
                let mut rng = rng_for(
                    settings.downstream.seed,
                    &format!("eval-proximity-{modality}"),
                );
                let result = proximity_probe(
                    &dataset.graph,
                    modality,
                    &centroids,
                    &aligned,
                    settings.sample_frac,
                    &mut rng,
                )?;
                let name = proximity_file(modality);
                write_pairs_csv(&out_dir.join(&name), &result)?;
                manifest.set_f64(&format!("stat.spearman.{}", modality.as_str()), result.spearman);
                artifacts.push(name);
            }
        }
    }
    let names: Vec<&str> = artifacts.iter().map(|s| s.as_str()).collect();
    digest_artifacts(&mut manifest, out_dir, &names)?;
    finish_manifest(manifest, out_dir, start)
}

// --- merge ------------------------------------------------------------------

fn validate_tag(tag: &str) -> Result<()> {
    let ok = !tag.is_empty()
        && tag
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "city tag {tag:?} must be non-empty [A-Za-z0-9_-]"
        )))
    }
}

fn prefixed(tag: &str, id: &str) -> String {
    let want = format!("{tag}_");
    if id.starts_with(&want) {
        id.to_string()
    } else {
        format!("{want}{id}")
    }
}

fn merge_attribute_tables(
    merged: &mut Option<AttributeTable>,
    tag: &str,
    table: AttributeTable,
    file: &str,
) -> Result<()> {
    match merged {
        None => {
            *merged = Some(AttributeTable::new(
                table.ids.iter().map(|id| prefixed(tag, id)).collect(),
                table.names,
                table.values,
            )?)
        }
        Some(existing) => {
            if existing.names != table.names {
                return Err(Error::InvalidArgument(format!(
                    "cannot merge {file}: column names differ across inputs"
                )));
            }
            existing
                .ids
                .extend(table.ids.iter().map(|id| prefixed(tag, id)));
            existing.values.extend(table.values);
        }
    }
    Ok(())
}

/// Concatenate data directories under per-city id prefixes. Ids get a
/// `{tag}_` prefix unless they already carry it, the city column is set to
/// the tag, and no inter-city edges of any kind are synthesized. A single
/// input is copied verbatim after an ingestibility check.
pub fn cmd_merge(inputs: &[(String, PathBuf)], out_dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "merge needs at least one input directory".into(),
        ));
    }
    let mut tags = BTreeSet::new();
    for (tag, _) in inputs {
        validate_tag(tag)?;
        if !tags.insert(tag.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate city tag {tag:?}")));
        }
    }

    let mut manifest = Manifest::new("merge");
    for (i, (tag, dir)) in inputs.iter().enumerate() {
        manifest.set_str(&format!("input.{i}.tag"), tag.clone());
        manifest.set_str(&format!("input.{i}.dir"), dir.display().to_string());
    }

    create_dir(out_dir)?;
    if inputs.len() == 1 {
        // Identity copy, but only of a directory that actually ingests.
        let (_, dir) = &inputs[0];
        load_dataset(dir)?;
        for name in DATA_FILES {
            let src = dir.join(name);
            if src.exists() {
                if name == ATTRIBUTES_FILE || name == ATTRIBUTES_TRUE_FILE {
                    parse_attributes_csv(&read_file(&src)?)?;
                }
                fs::copy(&src, out_dir.join(name)).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", src.display())))
                })?;
            }
        }
        manifest.set_usize("stat.neighborhoods", load_dataset(out_dir)?.n());
        digest_artifacts(&mut manifest, out_dir, &DATA_FILES)?;
        return finish_manifest(manifest, out_dir, start);
    }

    let mut neighborhoods: Vec<Neighborhood> = Vec::new();
    let mut points: Vec<PointDatum> = Vec::new();
    let mut located: Vec<RelationDatum> = Vec::new();
    let mut resolved: Vec<ResolvedRelation> = Vec::new();
    let mut attributes: Option<AttributeTable> = None;
    let mut attributes_true: Option<AttributeTable> = None;

    for (tag, dir) in inputs {
        for mut nb in parse_neighborhoods_csv(&read_file(&dir.join(NEIGHBORHOODS_FILE))?)? {
            nb.id = prefixed(tag, &nb.id);
            nb.city = tag.clone();
            neighborhoods.push(nb);
        }
        if let Some(text) = read_optional(&dir.join(POINTS_FILE))? {
            points.extend(parse_points_csv(&text)?);
        }
        if let Some(text) = read_optional(&dir.join(RELATIONS_FILE))? {
            match parse_relations_csv(&text)? {
                RelationsFile::Located(data) => located.extend(data),
                RelationsFile::Resolved(data) => {
                    resolved.extend(data.into_iter().map(|mut r| {
                        r.src_id = prefixed(tag, &r.src_id);
                        r.dst_id = prefixed(tag, &r.dst_id);
                        r
                    }));
                }
            }
        }
        if let Some(text) = read_optional(&dir.join(ATTRIBUTES_FILE))? {
            merge_attribute_tables(&mut attributes, tag, parse_attributes_csv(&text)?, ATTRIBUTES_FILE)?;
        }
        if let Some(text) = read_optional(&dir.join(ATTRIBUTES_TRUE_FILE))? {
            merge_attribute_tables(
                &mut attributes_true,
                tag,
                parse_attributes_csv(&text)?,
                ATTRIBUTES_TRUE_FILE,
            )?;
        }
    }
    if !located.is_empty() && !resolved.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot merge located and resolved relation files".into(),
        ));
    }

    let mut ids = BTreeSet::new();
    for nb in &neighborhoods {
        if !ids.insert(nb.id.as_str()) {
            return Err(Error::DuplicateId(nb.id.clone()));
        }
    }

    write_neighborhoods_csv(&out_dir.join(NEIGHBORHOODS_FILE), &neighborhoods)?;
    if !points.is_empty() {
        write_points_csv(&out_dir.join(POINTS_FILE), &points)?;
    }
    if !located.is_empty() {
        write_relations_csv(&out_dir.join(RELATIONS_FILE), &located)?;
    }
    if !resolved.is_empty() {
        crate::io::write_resolved_relations_csv(&out_dir.join(RELATIONS_FILE), &resolved)?;
    }
    if let Some(table) = &attributes {
        write_attributes_csv(&out_dir.join(ATTRIBUTES_FILE), table)?;
    }
    if let Some(table) = &attributes_true {
        write_attributes_csv(&out_dir.join(ATTRIBUTES_TRUE_FILE), table)?;
    }

    // The merged directory must itself ingest cleanly.
    let merged = load_dataset(out_dir)?;
    manifest.set_usize("stat.neighborhoods", merged.n());
    digest_artifacts(&mut manifest, out_dir, &DATA_FILES)?;
    finish_manifest(manifest, out_dir, start)
}
