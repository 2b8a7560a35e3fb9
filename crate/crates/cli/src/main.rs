//! `paneval`: SSIM, FID and story scores from files, written as JSON or
//! Markdown reports.
//!
//! Exit codes: 0 success, 2 invalid arguments or inputs, 3 I/O or decode
//! failure, 4 numeric failure, 5 embedding provider failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use paneval::ErrorKind;

#[derive(Parser)]
#[command(name = "paneval", version, about = "Story score, SSIM and FID evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SSIM between a candidate image batch and a target batch.
    Ssim(SsimArgs),
    /// FID between two feature files.
    Fid(FidArgs),
    /// Story score of a candidate summary against a target and a reference corpus.
    StoryScore(StoryArgs),
    /// Merge reports of one metric into a comparison table.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PairingArg {
    Cross,
    Indexed,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ResizeArg {
    Strict,
    Bilinear,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FeatureFormatArg {
    Binary,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CovarianceArg {
    Full,
    Diagonal,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProviderArg {
    Http,
    File,
}

#[derive(Args)]
pub struct SsimArgs {
    /// Directory or glob of candidate images.
    #[arg(long)]
    pub candidates: String,
    /// Directory or glob of target images.
    #[arg(long)]
    pub targets: String,
    #[arg(long, value_enum, default_value_t = PairingArg::Cross)]
    pub pairing: PairingArg,
    #[arg(long, default_value_t = 11)]
    pub window: usize,
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = ResizeArg::Strict)]
    pub resize: ResizeArg,
    /// Row label; defaults to the candidates argument.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct FidArgs {
    #[arg(long)]
    pub candidate_features: PathBuf,
    #[arg(long)]
    pub target_features: PathBuf,
    #[arg(long, value_enum, default_value_t = FeatureFormatArg::Binary)]
    pub feature_format: FeatureFormatArg,
    #[arg(long, default_value_t = paneval::fid::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Full)]
    pub covariance: CovarianceArg,
    /// Row label; defaults to the candidate feature path.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct StoryArgs {
    /// Story corpus manifest (JSON).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Overrides the manifest's gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Needed only when some document has no pinned embedding.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderArg>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub lookup: Option<PathBuf>,
    /// HTTP timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Report JSON files to merge.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
        ErrorKind::Provider => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ssim(args) => commands::ssim(args),
        Command::Fid(args) => commands::fid(args),
        Command::StoryScore(args) => commands::story_score(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("paneval: {}", one_line(&e));
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn one_line(e: &paneval::Error) -> String {
    e.to_string().replace('\n', " ")
}
