use std::path::PathBuf;
use std::process::ExitCode;

use blockrag_core::formats::FormatError;
use blockrag_core::verify::Suite;
use clap::{Args, Parser, Subcommand};

mod commands;
mod settings;

/// Layout-aware block retrieval: aggregate, index, search, evaluate.
#[derive(Debug, Parser)]
#[command(name = "blockrag", version)]
struct Cli {
    /// Run configuration (TOML, or JSON for a .json path). Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for scoring and evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate layout regions into blocks.
    Aggregate(AggregateArgs),
    /// Build an LFIX index from blocks JSON and a vector file.
    Index(IndexArgs),
    /// Rank blocks or pages for every query vector.
    Search(SearchArgs),
    /// Score rankings and answers against a benchmark manifest.
    Eval(EvalArgs),
    /// Run the randomized numeric self-checks.
    Verify(VerifyArgs),
    /// Print corpus statistics of a manifest.
    Stats(StatsArgs),
    /// Write a deterministic synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct AggregationFlags {
    /// Minimum horizontal IoU between merged regions.
    #[arg(long)]
    pub tau_x: Option<f64>,
    /// Maximum vertical gap in pixels.
    #[arg(long)]
    pub tau_y: Option<f64>,
    /// Overlap ratio that forces a merge.
    #[arg(long)]
    pub tau_o: Option<f64>,
    /// Tolerated vertical overlap in pixels.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Require identical tags instead of compatible tag groups.
    #[arg(long)]
    pub exact_tags: bool,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Layout JSON: one page object or an array of pages.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Blocks JSON output (stdout if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub aggregation: AggregationFlags,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Blocks JSON written by `aggregate`.
    #[arg(long)]
    pub blocks: PathBuf,
    /// LFVE file with one entry per block id.
    #[arg(long)]
    pub vectors: PathBuf,
    /// JSON object mapping block id to generator token cost.
    #[arg(long)]
    pub token_costs: Option<PathBuf>,
    /// LFIX output path.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// LFIX index written by `index`.
    #[arg(long)]
    pub index: PathBuf,
    /// LFVE file with one entry per query id.
    #[arg(long)]
    pub queries: PathBuf,
    /// Only search these query ids (repeatable).
    #[arg(long = "query-id")]
    pub query_ids: Vec<String>,
    /// Ranking depth written per query.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Entries handed to the generator; drives the token count.
    #[arg(long, short)]
    pub k: Option<usize>,
    /// Rank pages by their best block instead of ranking blocks.
    #[arg(long)]
    pub page_level: bool,
    /// Leave the masked-page block out of page scores.
    #[arg(long)]
    pub exclude_mask: bool,
    /// L2-normalize query and block rows before scoring.
    #[arg(long)]
    pub normalize: bool,
    /// Ranking JSON output (stdout if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Block-level ranking JSON from `search`.
    #[arg(long)]
    pub results: PathBuf,
    /// Page-level ranking JSON from `search --page-level`.
    #[arg(long)]
    pub page_results: Option<PathBuf>,
    /// JSON array of {query_id, answer, judge_score?}.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    /// Metric cutoffs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Entries handed to the generator; drives token accounting and ANLCS.
    #[arg(long, short)]
    pub k: Option<usize>,
    /// ROUGE-L recall weight.
    #[arg(long)]
    pub rouge_beta: Option<f64>,
    /// Report JSON output (stdout if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite to run; all suites when omitted.
    #[arg(long)]
    pub suite: Option<Suite>,
    /// Seed of the random cases.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Benchmark manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub pages: usize,
    /// Questions generated per page.
    #[arg(long, default_value_t = 2)]
    pub samples_per_page: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
}

/// Exit code 2 for filesystem failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some() || e.downcast_ref::<FormatError>().is_some_and(FormatError::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !prev.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are validation errors; 2 is reserved for I/O
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = settings::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Aggregate(a) => commands::aggregate(cfg, a),
        Command::Index(a) => commands::index(a),
        Command::Search(a) => commands::search(cfg, a),
        Command::Eval(a) => commands::eval(cfg, a),
        Command::Verify(a) => commands::verify(a),
        Command::Stats(a) => commands::stats(cfg, a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
