use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbcr::metric::Metric;
use dbcr::retrieval::Layout;

mod commands;
mod config;

/// Exit status for a run that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Comparability = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            kind,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Failure::new(ExitKind::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Failure::new(ExitKind::Data, anyhow::anyhow!("{msg}"))
    }
}

impl From<dbcr::Error> for Failure {
    fn from(e: dbcr::Error) -> Self {
        use dbcr::error::{Error, EvalError, IndexError};
        let kind = match &e {
            Error::Compare(_)
            | Error::Index(IndexError::Compare(_) | IndexError::Fingerprint { .. }) => {
                ExitKind::Comparability
            }
            Error::Config(_) | Error::Eval(EvalError::Config(_)) => ExitKind::Usage,
            _ => ExitKind::Data,
        };
        Failure::new(kind, e)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "dbcr",
    version,
    about = "Index, query and benchmark image collections"
)]
pub struct Cli {
    /// Worker threads for description and benchmarking (default: all cores)
    #[arg(long, global = true, env = "DBCR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Describe every image under a dataset directory and write an index
    Index(IndexArgs),
    /// Rank indexed images by distance to a query image
    Query(QueryArgs),
    /// Run the retrieval benchmark over an index
    Evaluate(EvaluateArgs),
    /// Print one image's descriptor as JSON
    Describe(DescribeArgs),
    /// Print an index header and its class counts
    Info(InfoArgs),
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// Dataset root
    pub dataset: PathBuf,
    /// Index file to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "classdirs", value_parser = parse_layout)]
    pub layout: Layout,
    /// TOML file with [descriptor] and [eval] tables
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Leave out files that fail to decode instead of aborting
    #[arg(long)]
    pub skip_errors: bool,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    /// Descriptor configuration; defaults to the one recorded next to the index
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the ranking as JSON
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub rank_window: Option<usize>,
    /// Leave each query out of its own result list
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output prefix: writes PREFIX.json, PREFIX.txt, PREFIX.queries.csv
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also compare all four metrics
    #[arg(long)]
    pub all_metrics: bool,
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub index: PathBuf,
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    s.parse()
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::usage)?;
    }
    match cli.command {
        Command::Index(args) => commands::index(&args),
        Command::Query(args) => commands::query(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Describe(args) => commands::describe(&args),
        Command::Info(args) => commands::info(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.kind as u8)
        }
    }
}
