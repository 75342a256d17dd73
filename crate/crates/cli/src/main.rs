//! `flowforge`: capture replay, flow accounting, decision-tree
//! classification, NetFlow v9 export/collection, and pipeline benchmarks
//! behind one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure. Every failure
//! also prints one machine-readable JSON object on stderr, as the last
//! stderr line: `{"error":"usage"|"runtime","message":"..."}`.

mod cmd;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

/// A failed invocation, split by whose fault it is: `Usage` is a bad
/// command line or config (exit 1), `Runtime` is a valid request the
/// environment could not satisfy (exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flowforge",
    version,
    about = "Flow monitoring, NetFlow v9 export, and in-band decision-tree classification",
    after_help = config::keys_help(),
)]
struct Cli {
    /// Flat key=value config file; flags override it, it overrides defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feed a pcap through the flow pipeline; emit CSV and optionally v9
    Run(cmd::run::RunArgs),
    /// Compile a dtm-1 decision tree to P4 pipeline text
    Compile(cmd::compile::CompileArgs),
    /// Classify CSV flow records; report per-class quality when labeled
    Classify(cmd::classify::ClassifyArgs),
    /// Re-export CSV flow records as NetFlow v9 datagrams
    Export(cmd::export::ExportArgs),
    /// Receive NetFlow v9 datagrams over UDP and decode them to CSV
    Collect(cmd::collect::CollectArgs),
    /// Benchmark the forwarding / netflow / nids pipelines
    Bench(cmd::bench::BenchArgs),
    /// Generate a synthetic pcap
    Gen(cmd::gen::GenArgs),
}

fn main() {
    std::process::exit(run_cli());
}

fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => return clap_exit(err),
    };
    let mut settings = config::Settings::default();
    if let Some(path) = &cli.config {
        if let Err(e) = settings.load_file(path) {
            return report(&e);
        }
    }
    let result = match &cli.command {
        Command::Run(args) => cmd::run::run(args, settings),
        Command::Compile(args) => cmd::compile::run(args, settings),
        Command::Classify(args) => cmd::classify::run(args, settings),
        Command::Export(args) => cmd::export::run(args, settings),
        Command::Collect(args) => cmd::collect::run(args, settings),
        Command::Bench(args) => cmd::bench::run(args, settings),
        Command::Gen(args) => cmd::gen::run(args, settings),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

/// Print the JSON diagnostic and map the error to its exit code.
fn report(err: &CliError) -> i32 {
    let (kind, message, code) = match err {
        CliError::Usage(m) => ("usage", m.clone(), 1),
        CliError::Runtime(e) => ("runtime", format!("{e:#}"), 2),
    };
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    code
}

/// Requested help/version renders to stdout and exits 0; anything else is
/// a usage error: human-readable text, then the JSON line, exit 1.
fn clap_exit(err: clap::Error) -> i32 {
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{err}");
            0
        }
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
            eprint!("{err}");
            report(&CliError::Usage(
                "a subcommand is required; see --help".to_string(),
            ))
        }
        _ => {
            eprint!("{err}");
            let message = err
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            report(&CliError::Usage(message))
        }
    }
}
