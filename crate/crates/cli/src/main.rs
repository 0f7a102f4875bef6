//! `cmrag`: build indexes, run retrieval benchmarks and render result tables.
//!
//! Exit codes: 0 ok, 2 configuration or usage, 3 input/output, 4 backend.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmrag_core::Error;

#[derive(Parser, Debug)]
#[command(name = "cmrag", version, about = "Speech/text retrieval-augmented QA benchmarks")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chunk a dataset, embed the chunks and write the index directory.
    Index(IndexArgs),
    /// Retrieve the top-k chunks for one query.
    Retrieve(RetrieveArgs),
    /// Run one system configuration over a dataset and write a report.
    Bench(BenchArgs),
    /// Measure retrieval quality against mock speech-encoder noise.
    SweepAlignment(SweepArgs),
    /// Render report JSON files as a results table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// hotpotqa, rgb or synthetic.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Dataset file (HotpotQA JSON or RGB JSONL).
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Language tag for RGB files (en or zh).
    #[arg(long)]
    pub lang: Option<String>,
    /// Maximum characters per chunk.
    #[arg(long)]
    pub max_chars: Option<usize>,
    /// Synthetic corpus size.
    #[arg(long, default_value_t = 1000)]
    pub synthetic_chunks: usize,
    /// Synthetic query count.
    #[arg(long, default_value_t = 200)]
    pub synthetic_queries: usize,
    /// Seed for synthetic data.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EndpointArgs {
    /// Encoder service URL for specs given as plain `remote`.
    #[arg(long)]
    pub encoder_url: Option<String>,
    /// ASR service URL for specs given as plain `remote`.
    #[arg(long)]
    pub asr_url: Option<String>,
    /// Generation service URL for specs given as plain `remote`.
    #[arg(long)]
    pub gen_url: Option<String>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Text encoder spec: mock:dim=..,seed=.. | fixture:PATH | remote[:URL].
    #[arg(long, alias = "text-encoder")]
    pub encoder: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct RetrieveArgs {
    /// Index directory (or its index.bin).
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// e2e, cascade or oracle.
    #[arg(long, default_value = "e2e")]
    pub mode: String,
    /// Query text (the transcript, for mock backends).
    #[arg(long)]
    pub query: Option<String>,
    /// Query audio (WAV).
    #[arg(long)]
    pub audio: Option<PathBuf>,
    /// Query id, used by fixture encoders.
    #[arg(long, default_value = "query")]
    pub id: String,
    #[arg(long, default_value = "en")]
    pub lang: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Text encoder spec.
    #[arg(long)]
    pub text_encoder: Option<String>,
    /// Speech encoder spec.
    #[arg(long)]
    pub speech_encoder: Option<String>,
    /// ASR spec: mock:delay=..,wer=..,seed=.. | remote[:URL].
    #[arg(long)]
    pub asr: Option<String>,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// no_rag, facts, asr_rag, oracle_rag or e2e_rag.
    #[arg(long)]
    pub mode: String,
    #[command(flatten)]
    pub data: DataArgs,
    /// Index directory (or its index.bin); also supplies the dataset when --in is absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Speech manifest (JSONL: query_id, wav, sample_rate, duration_s).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Chunks retrieved per query.
    #[arg(long)]
    pub k: Option<usize>,
    /// cosine or dot.
    #[arg(long)]
    pub similarity: Option<String>,
    #[arg(long)]
    pub text_encoder: Option<String>,
    #[arg(long)]
    pub speech_encoder: Option<String>,
    #[arg(long)]
    pub asr: Option<String>,
    /// Generator spec: mock | remote[:URL] | none.
    #[arg(long)]
    pub generator: Option<String>,
    /// Worker threads (1 keeps latencies uncontended).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Only the first N queries.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated noise levels.
    #[arg(long, default_value = "0,0.2,0.5,1,2")]
    pub eps: String,
    /// Mock encoder spec supplying dim and seed.
    #[arg(long, alias = "text-encoder")]
    pub encoder: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub chunks: usize,
    #[arg(long, default_value_t = 500)]
    pub queries: usize,
    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub k: Option<usize>,
    /// CSV output path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files; rows keep their first-seen order within a method.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// md or csv.
    #[arg(long, default_value = "md")]
    pub format: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;

/// Maps an error to its stable exit code.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_backend() {
        return EXIT_BACKEND;
    }
    match e {
        Error::FatalConfig(_)
        | Error::BadSpec { .. }
        | Error::InvalidPolicy(_)
        | Error::UnsupportedLanguage(_)
        | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_IO,
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

    let file = match config::FileConfig::load_opt(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if matches!(e, Error::Io(_)) { EXIT_IO } else { EXIT_CONFIG });
        }
    };
    let result = match cli.command {
        Command::Index(a) => commands::index(&a, &file),
        Command::Retrieve(a) => commands::retrieve(&a, &file),
        Command::Bench(a) => commands::bench(&a, &file),
        Command::SweepAlignment(a) => commands::sweep(&a, &file),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure { error, code }) => {
            eprintln!("error: {error}");
            if code == EXIT_CONFIG {
                eprintln!("run `cmrag --help` for usage");
            }
            ExitCode::from(code)
        }
    }
}
