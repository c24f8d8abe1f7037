//! `sluaug`: augment slot-filling corpora from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 bad
//! input, 4 backend unreachable.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sluaug_core::augment::lm::{build_filter_pairs, write_pairs, FailPolicy, HttpBackend};
use sluaug_core::augment::write_provenance;
use sluaug_core::corpus::{parse_corpus, parse_trees, read_three_file_dir, write_corpus};
use sluaug_core::pipeline::{stats_report, PipelineError};
use sluaug_core::slot_index::Weighting;
use sluaug_core::{run_augment, AugConfig, Backends, Corpus, CorpusError, Method, SlotIndex};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("backend unreachable at {url}: {reason}")]
    Backend { url: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Backend { .. } => 4,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn corpus(path: &Path, e: CorpusError) -> CliError {
        match e {
            CorpusError::Io(source) => CliError::Io {
                path: path.to_owned(),
                source,
            },
            other => CliError::Input(format!("{}: {other}", path.display())),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sluaug",
    version,
    about = "Data augmentation for slot filling and intent classification"
)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment a JSONL corpus with one method.
    Augment(AugmentArgs),
    /// Corpus statistics as JSON.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// An augmented corpus to report alongside the input.
        #[arg(long)]
        augmented: Option<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a corpus (and optionally its trees) and report problems.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        trees: Option<PathBuf>,
    },
    /// Build the slot-value index.
    Index {
        #[arg(long)]
        input: PathBuf,
        /// Dump every label's values and counts as JSON.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write balanced accept/reject pairs for training the filter.
    FilterPairs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
    },
    /// Convert another corpus layout to JSONL.
    Convert {
        #[arg(long, value_enum)]
        from: SourceFormat,
        /// Directory holding seq.in, seq.out and label.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceFormat {
    ThreeFile,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    SlotSub,
    SlotSubLm,
    Crop,
    Rotate,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::SlotSub => Method::SlotSub,
            MethodArg::SlotSubLm => Method::SlotSubLm,
            MethodArg::Crop => Method::Crop,
            MethodArg::Rotate => Method::Rotate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    Frequency,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    input: PathBuf,
    /// CoNLL-U parses, required by crop and rotate.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Augmentations per utterance (slot-sub, slot-sub-lm).
    #[arg(long = "n", default_value_t = 5)]
    n_aug: usize,
    #[arg(long, default_value_t = 13)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    top_p: f64,
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    #[arg(long, default_value_t = 3)]
    max_crop: usize,
    #[arg(long, default_value_t = 3)]
    max_rotate: usize,
    /// Score LM candidates with the pair classifier.
    #[arg(long)]
    filter: bool,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Keep candidates when the scorer cannot be reached.
    #[arg(long)]
    fail_open: bool,
    #[arg(long, env = "SLUAUG_BACKEND_URL")]
    backend_url: Option<String>,
    #[arg(long)]
    no_dedup: bool,
    /// Emit the input corpus followed by the augmented records.
    #[arg(long)]
    union: bool,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: WeightingArg,
    /// Slot-sub draws only values seen in other utterances.
    #[arg(long)]
    strict_other_sentences: bool,
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
    #[arg(long)]
    output: PathBuf,
    /// Defaults to `<output>.provenance.jsonl`.
    #[arg(long)]
    provenance: Option<PathBuf>,
    /// Write the run's statistics report here.
    #[arg(long)]
    stats: Option<PathBuf>,
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    parse_corpus(BufReader::new(file)).map_err(|e| CliError::corpus(path, e))
}

fn read_with_trees(input: &Path, trees: Option<&Path>) -> Result<Corpus, CliError> {
    let corpus = read_corpus(input)?;
    let Some(path) = trees else {
        return Ok(corpus);
    };
    let file = File::open(path).map_err(CliError::io(path))?;
    let trees = parse_trees(BufReader::new(file)).map_err(|e| CliError::corpus(path, e))?;
    corpus
        .with_trees(trees)
        .map_err(|e| CliError::corpus(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(path))
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}")
                .and_then(|_| w.flush())
                .map_err(CliError::io(p))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn default_provenance(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".provenance.jsonl");
    PathBuf::from(name)
}

fn augment(a: AugmentArgs) -> Result<(), CliError> {
    let method = Method::from(a.method);
    if method.uses_trees() && a.trees.is_none() {
        return Err(CliError::Config(format!("{method} needs --trees")));
    }
    let backend_url = match method {
        Method::SlotSubLm => a.backend_url.clone(),
        _ => {
            if a.backend_url.is_some() {
                log::debug!("ignoring backend URL for {method}");
            }
            None
        }
    };
    let cfg = AugConfig {
        method,
        n_aug: a.n_aug,
        seed: a.seed,
        top_p: a.top_p,
        top_k: a.top_k,
        max_crop: a.max_crop,
        max_rotate: a.max_rotate,
        filter_enabled: a.filter,
        filter_threshold: a.threshold,
        filter_on_error: if a.fail_open {
            FailPolicy::Open
        } else {
            FailPolicy::Closed
        },
        backend_url,
        dedup: !a.no_dedup,
        emit_union: a.union,
        weighting: match a.weighting {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Frequency => Weighting::Frequency,
        },
        other_sentences_only: a.strict_other_sentences,
        max_in_flight: a.max_in_flight,
        ..AugConfig::default()
    };
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let corpus = read_with_trees(&a.input, a.trees.as_deref())?;
    let http = cfg.backend_url.as_deref().map(HttpBackend::new);
    if let Some(h) = &http {
        h.health().map_err(|e| CliError::Backend {
            url: h.base_url().to_owned(),
            reason: e.to_string(),
        })?;
    }
    let backends = Backends {
        fill: http.as_ref().map(|h| h as _),
        scorer: http.as_ref().filter(|_| cfg.filter_enabled).map(|h| h as _),
    };
    let out = run_augment(&corpus, &cfg, backends).map_err(|e| match e {
        PipelineError::Corpus(e) => CliError::Input(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    log::info!(
        "{}: {} utterances in, {} augmented records",
        method,
        corpus.len(),
        out.records.len()
    );
    for (reason, n) in &out.stats.discards {
        log::info!("discarded {n} ({reason})");
    }

    let w = create(&a.output)?;
    write_corpus(&out.emitted, w).map_err(CliError::io(&a.output))?;
    let prov_path = a
        .provenance
        .unwrap_or_else(|| default_provenance(&a.output));
    let w = create(&prov_path)?;
    write_provenance(&out.records, w).map_err(CliError::io(&prov_path))?;
    if let Some(p) = &a.stats {
        write_json(&out.stats, Some(p))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Augment(a) => augment(a),
        Command::Stats {
            input,
            augmented,
            output,
        } => {
            let original = read_corpus(&input)?;
            let aug = match &augmented {
                Some(p) => read_corpus(p)?,
                None => Corpus::default(),
            };
            write_json(&stats_report(&original, &aug), output.as_deref())
        }
        Command::Validate { input, trees } => {
            let corpus = read_with_trees(&input, trees.as_deref())?;
            println!(
                "{}: {} utterances, {} trees, ok",
                input.display(),
                corpus.len(),
                corpus.trees().len()
            );
            Ok(())
        }
        Command::Index {
            input,
            dump,
            output,
        } => {
            let idx = SlotIndex::build(&read_corpus(&input)?);
            if dump {
                write_json(&idx.dump(), output.as_deref())
            } else {
                let counts: std::collections::BTreeMap<&str, usize> =
                    idx.labels().map(|l| (l, idx.values(l).count())).collect();
                write_json(&counts, output.as_deref())
            }
        }
        Command::FilterPairs {
            input,
            output,
            seed,
        } => {
            let corpus = read_corpus(&input)?;
            let idx = SlotIndex::build(&corpus);
            let pairs = build_filter_pairs(&corpus, &idx, seed)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let w = create(&output)?;
            write_pairs(&pairs, w).map_err(CliError::io(&output))?;
            log::info!("wrote {} pairs to {}", pairs.len(), output.display());
            Ok(())
        }
        Command::Convert {
            from: SourceFormat::ThreeFile,
            input,
            output,
        } => {
            let corpus = read_three_file_dir(&input).map_err(|e| CliError::corpus(&input, e))?;
            let w = create(&output)?;
            write_corpus(&corpus, w).map_err(CliError::io(&output))?;
            log::info!("converted {} utterances", corpus.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
