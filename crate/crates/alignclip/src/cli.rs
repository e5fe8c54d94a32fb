//! `alignclip` subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use alignclip_core::data::{generate_dataset, Dataset, GroundTruthSemantics, PrecomputedSemantics, SemanticProvider, Split};
use alignclip_core::linalg::Matrix;
use alignclip_core::metrics::{embed_rows, evaluate, sphere_projection, Provenance};
use alignclip_core::trainer::{check_compatible, Trainer};
use clap::{Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{parse_gen_config, parse_train_config, read_text, render_train_config, TrainSpec};
use crate::dataset_file::{load_dataset, save_dataset};
use crate::error::{exit, Error, Result};
use crate::report::{compare, emit_report, read_report, write_history, write_projection};

/// File names inside a training output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint";
pub const HISTORY_FILE: &str = "history";
pub const CONFIG_FILE: &str = "config.cfg";
pub const REPORT_FILE: &str = "report.json";

/// Environment variable holding the log filter, e.g. `info` or `debug`.
pub const LOG_ENV: &str = "ALIGNCLIP_LOG";

#[derive(Debug, Parser)]
#[command(name = "alignclip", version, about = "Train and measure shared-encoder contrastive models on synthetic scenes")]
struct Cli {
    /// Worker threads; results are bit-reproducible for a fixed count.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    GenerateData {
        /// Generator settings (key = value).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model; writes checkpoint, history, config.cfg and report.json into --out.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Precomputed semantic vectors (CSV, one row per dataset row) instead of ground truth.
        #[arg(long)]
        semantics: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on one split and write a report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report file, or a directory to receive report.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Side-by-side table of reports from one dataset.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export both modalities' embeddings projected onto the unit sphere (CSV).
    Project {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "test")]
        split: String,
    },
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::config("--threads", "must be at least 1"));
    }
    match cli.command {
        Command::GenerateData { config, out, seed } => generate(config.as_deref(), &out, seed),
        Command::Train {
            config,
            data,
            out,
            preset,
            seed,
            semantics,
        } => {
            let mut spec = match &config {
                Some(p) => parse_train_config(&read_text(p)?, &p.display().to_string(), preset.as_deref())?,
                None => parse_train_config("", "--preset", preset.as_deref())?,
            };
            if let Some(s) = seed {
                spec.config.seed = s;
            }
            train(&spec, &data, &out, semantics.as_deref(), cli.threads)
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            split,
        } => eval(&checkpoint, &data, &out, parse_split(&split)?),
        Command::Compare { reports, out } => {
            let loaded = reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
            let table = compare(&loaded)?;
            print!("{table}");
            if let Some(o) = out {
                std::fs::write(&o, table).map_err(Error::io(o))?;
            }
            Ok(())
        }
        Command::Project {
            checkpoint,
            data,
            out,
            seed,
            split,
        } => project(&checkpoint, &data, &out, seed, parse_split(&split)?),
    }
}

fn parse_split(s: &str) -> Result<Split> {
    Split::parse(s).ok_or_else(|| Error::config("--split", format!("expected train, val or test, got {s:?}")))
}

fn generate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut g = match config {
        Some(p) => parse_gen_config(&read_text(p)?, &p.display().to_string())?,
        None => parse_gen_config("", "defaults")?,
    };
    if let Some(s) = seed {
        g.seed = s;
    }
    let d = generate_dataset(&g)?;
    let tag = save_dataset(out, &d)?;
    println!("{tag}");
    Ok(())
}

/// Reads one row of floats per dataset row.
pub fn load_semantics_csv(path: &Path, dataset: &Dataset) -> Result<PrecomputedSemantics> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::CorruptFile {
                what: path.display().to_string(),
                reason: format!("row {}: {e}", rows.len() + 1),
            })?;
        rows.push(row);
    }
    if rows.len() != dataset.len() {
        return Err(Error::CorruptFile {
            what: path.display().to_string(),
            reason: format!("{} rows for a dataset of {}", rows.len(), dataset.len()),
        });
    }
    Ok(PrecomputedSemantics::new(Matrix::from_rows(&rows)?)?)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("--threads", e.to_string()))?;
    Ok(pool.install(f))
}

pub fn train(spec: &TrainSpec, data: &Path, out: &Path, semantics: Option<&Path>, threads: usize) -> Result<()> {
    let (dataset, tag) = load_dataset(data)?;
    let provider: Box<dyn SemanticProvider + Sync> = match semantics {
        Some(p) => Box::new(load_semantics_csv(p, &dataset)?),
        None => Box::new(GroundTruthSemantics),
    };
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    std::fs::write(out.join(CONFIG_FILE), render_train_config(spec)).map_err(Error::io(out.join(CONFIG_FILE)))?;
    let state = with_threads(threads, || -> Result<_> {
        let mut t = Trainer::new(spec.config.clone(), &dataset, provider.as_ref())?.with_parallel(threads > 1);
        t.run_with(|r| {
            log::info!(
                "epoch {} step {} loss {:.5} val alignment {:.4} gap {:.4} lr {:.3e}",
                r.epoch,
                r.step,
                r.loss.total,
                r.val_alignment,
                r.val_gap,
                r.lr
            )
        })?;
        Ok(t.into_state())
    })??;
    let provenance = Provenance {
        model: spec.tag().to_string(),
        dataset: tag.clone(),
        seed: spec.config.seed,
        split: Split::Val.as_str().to_string(),
    };
    let report = evaluate(&state.params, &dataset, Split::Val, provenance)?;
    let ckpt = Checkpoint {
        spec: spec.clone(),
        dataset: tag,
        state,
    };
    save_checkpoint(&out.join(CHECKPOINT_FILE), &ckpt)?;
    write_history(&out.join(HISTORY_FILE), &ckpt.state.history)?;
    emit_report(&report, &out.join(REPORT_FILE))
}

fn load_pair(checkpoint: &Path, data: &Path) -> Result<(Checkpoint, Dataset, String)> {
    let ckpt = load_checkpoint(checkpoint, None)?;
    let (dataset, tag) = load_dataset(data)?;
    check_compatible(&ckpt.spec.config.model, &dataset)?;
    Ok((ckpt, dataset, tag))
}

pub fn eval(checkpoint: &Path, data: &Path, out: &Path, split: Split) -> Result<()> {
    let (ckpt, dataset, tag) = load_pair(checkpoint, data)?;
    let provenance = Provenance {
        model: ckpt.spec.tag().to_string(),
        dataset: tag,
        seed: ckpt.spec.config.seed,
        split: split.as_str().to_string(),
    };
    let report = evaluate(&ckpt.state.params, &dataset, split, provenance)?;
    let path = if out.is_dir() { out.join(REPORT_FILE) } else { out.to_path_buf() };
    emit_report(&report, &path)
}

pub fn project(checkpoint: &Path, data: &Path, out: &Path, seed: u64, split: Split) -> Result<()> {
    let (ckpt, dataset, _) = load_pair(checkpoint, data)?;
    let rows = dataset.split_indices(split);
    let (ev, et) = embed_rows(&ckpt.state.params, &dataset, &rows)?;
    write_projection(out, &sphere_projection(&ev, &et, seed)?)
}
