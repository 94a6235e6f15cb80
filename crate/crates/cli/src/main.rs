mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Audit a C protocol implementation against the mandatory requirements
/// of its RFC.
#[derive(Debug, Parser)]
#[command(name = "rfc-audit", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file (also RFC_AUDIT_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model backend: live, record, replay or mock.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Cassette file for record and replay.
    #[arg(long, global = true)]
    pub cassette: Option<PathBuf>,
    /// JSON rule file for the mock backend.
    #[arg(long, global = true)]
    pub mock_script: Option<PathBuf>,
    /// Maximum concurrent model calls.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Detection model tag.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Where to write the machine-readable status file.
    #[arg(long, global = true)]
    pub status: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or incrementally update the semantic index of a repository.
    Index(IndexArgs),
    /// Segment an RFC and extract its mandatory requirements.
    Properties(PropertiesArgs),
    /// Check every property against the repository.
    Audit(AuditArgs),
    /// Render a completed run as Markdown or JSON.
    Report(ReportArgs),
    /// Run a retrieval tool by hand.
    Tools {
        #[command(subcommand)]
        tool: ToolCommand,
    },
    /// Configuration commands.
    Config {
        #[command(subcommand)]
        action: ConfigCommand,
    },
}

#[derive(Debug, Args)]
pub struct RepoArgs {
    /// Repository root.
    #[arg(long)]
    pub repo: Option<PathBuf>,
    /// Include glob (repeatable); replaces the configured list.
    #[arg(long)]
    pub include: Vec<String>,
    /// Exclude glob (repeatable); replaces the configured list.
    #[arg(long)]
    pub exclude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub repo: RepoArgs,
    /// Index file to write; an existing file is updated incrementally.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ignore an existing index and summarize everything again.
    #[arg(long)]
    pub rebuild: bool,
}

#[derive(Debug, Args)]
pub struct PropertiesArgs {
    /// Plain-text RFC.
    #[arg(long)]
    pub rfc: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Send every leaf section to the model, not only those with
    /// MUST/SHALL/REQUIRED.
    #[arg(long)]
    pub no_keyword_filter: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub repo: RepoArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub props: PathBuf,
    /// run.json path; transcripts and status.json go beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Localize from function names and signatures only.
    #[arg(long)]
    pub no_semantic_index: bool,
    /// Conclude inconclusive whenever more context is requested.
    #[arg(long)]
    pub no_retrieval: bool,
    /// Report candidates without the self-critique review.
    #[arg(long)]
    pub no_validation: bool,
    /// Disable one tool: query, callee or caller (repeatable).
    #[arg(long, value_name = "TOOL")]
    pub disable_tool: Vec<String>,
    #[arg(long)]
    pub max_retrieval: Option<usize>,
    /// Only audit these property ids (repeatable).
    #[arg(long = "property", value_name = "ID")]
    pub only: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// run.json produced by `audit`.
    pub run: PathBuf,
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// JSON map from report id to {status, novelty}.
    #[arg(long)]
    pub triage: Option<PathBuf>,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ToolCommand {
    /// Definition of a type, macro or function.
    Def {
        name: String,
        #[command(flatten)]
        repo: RepoArgs,
    },
    /// Every caller of a function.
    Callers {
        function: String,
        #[arg(long)]
        path: Option<String>,
        #[command(flatten)]
        repo: RepoArgs,
    },
    /// Definitions reached from a call inside `caller`.
    Callees {
        caller: String,
        callee: String,
        #[arg(long)]
        line: Option<usize>,
        #[command(flatten)]
        repo: RepoArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigCommand {
    /// Print the effective configuration.
    Show {
        #[command(flatten)]
        repo: RepoArgs,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("RFC_AUDIT_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(commands::run(cli))
}
