//! `m3g` — seeded neighborhood-embedding pipelines over data directories.
//!
//! Every command reads plain key-value config text, writes CSV artifacts,
//! and drops a `manifest.json` of flat key-value pairs (config snapshot,
//! input digests, artifact digests, wall time) next to them. Errors exit
//! nonzero with a single `error[CODE]: message` line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use m3g::io::{
    eval_settings_from_text, parse_edge_list, synth_config_from_text, train_config_from_text,
    EvalSettings,
};
use m3g::pipeline::{cmd_eval, cmd_merge, cmd_synth, cmd_train, EMBEDDINGS_FILE, REPORT_FILE};
use m3g::synth::SynthConfig;
use m3g::trainer::TrainConfig;
use m3g::{Error, Result};

#[derive(Parser)]
#[command(
    name = "m3g",
    version,
    about = "Neighborhood embeddings from street views, POIs, and mobility graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city as an ingestible data directory.
    Synth {
        /// Key-value config file; generator defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed, overriding the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output data directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train embeddings on a data directory.
    Train {
        /// Data directory with neighborhoods.csv and friends.
        #[arg(long)]
        data: PathBuf,
        /// Key-value config file; training defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stage-3 edge layers, comma separated (e.g. dist, mob, dist,mob).
        #[arg(long)]
        edges: Option<String>,
        /// Master seed, overriding the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Pretrained word vectors seeding the POI vocabulary.
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        /// Output directory for embeddings.csv and history.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate embeddings: regression report, clusters, proximity probes.
    Eval {
        /// Data directory the embeddings were trained on.
        #[arg(long)]
        data: PathBuf,
        /// Embedding CSV (id column plus one column per dimension).
        #[arg(long)]
        embeddings: PathBuf,
        /// Attribute CSV with regression targets.
        #[arg(long)]
        attributes: PathBuf,
        /// Key-value config file; evaluation defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict the regression report to one city tag.
        #[arg(long)]
        city: Option<String>,
        /// Master seed, overriding the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.csv and friends.
        #[arg(long)]
        out: PathBuf,
    },
    /// Concatenate data directories under per-city id prefixes.
    Merge {
        /// Inputs as TAG=DIR pairs; ids become TAG_<id>.
        #[arg(required = true, value_name = "TAG=DIR")]
        inputs: Vec<String>,
        /// Output data directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let mut cfg = match config {
                Some(path) => synth_config_from_text(&read_config(&path)?)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cmd_synth(&cfg, &out)?;
            Ok(format!(
                "synth: {} neighborhoods in {}",
                cfg.cities * cfg.neighborhoods,
                out.display()
            ))
        }
        Command::Train {
            data,
            config,
            edges,
            seed,
            word_vectors,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => train_config_from_text(&read_config(&path)?)?,
                None => TrainConfig::default(),
            };
            if let Some(edges) = edges {
                cfg.edge_modalities = parse_edge_list(&edges)?;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cmd_train(&data, &cfg, word_vectors.as_deref(), &out)?;
            Ok(format!(
                "train: wrote {}",
                out.join(EMBEDDINGS_FILE).display()
            ))
        }
        Command::Eval {
            data,
            embeddings,
            attributes,
            config,
            city,
            seed,
            out,
        } => {
            let mut settings = match config {
                Some(path) => eval_settings_from_text(&read_config(&path)?)?,
                None => EvalSettings::default(),
            };
            if let Some(seed) = seed {
                settings.downstream.seed = seed;
            }
            cmd_eval(
                &data,
                &embeddings,
                &attributes,
                &settings,
                city.as_deref(),
                &out,
            )?;
            Ok(format!("eval: wrote {}", out.join(REPORT_FILE).display()))
        }
        Command::Merge { inputs, out } => {
            let mut pairs = Vec::with_capacity(inputs.len());
            for input in &inputs {
                let Some((tag, dir)) = input.split_once('=') else {
                    return Err(Error::InvalidArgument(format!(
                        "merge input {input:?} is not of the form TAG=DIR"
                    )));
                };
                pairs.push((tag.to_string(), PathBuf::from(dir)));
            }
            cmd_merge(&pairs, &out)?;
            Ok(format!("merge: wrote {}", out.display()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
