//! File formats: CSV datasets, key-value config text, word-vector text, and
//! the flat JSON run manifest. Parsers take `&str` so they can be driven by
//! fuzzers without touching the filesystem.

pub mod config;
pub mod csv_files;
pub mod manifest;
pub mod words;

pub use config::{
    eval_settings_from_text, eval_settings_kv, parse_edge_list, parse_kv,
    synth_config_from_text, synth_config_kv, train_config_from_text, train_config_kv,
    EvalSettings,
};
pub use csv_files::{
    parse_attributes_csv, parse_clusters_csv, parse_embeddings_csv, parse_history_csv,
    parse_neighborhoods_csv, parse_pairs_csv, parse_points_csv, parse_relations_csv,
    parse_report_csv, write_attributes_csv, write_clusters_csv, write_embeddings_csv,
    write_history_csv, write_neighborhoods_csv, write_pairs_csv, write_points_csv,
    write_relations_csv, write_report_csv, write_resolved_relations_csv, HistoryRow,
    RelationsFile, ResolvedRelation,
};
pub use manifest::{sha256_hex, sha256_hex_file, Manifest};
pub use words::{parse_word_vectors, write_word_vectors};
