use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlasov_chain::config::parse_config;
use vlasov_chain::run::{run, RunError};

/// Builds, evolves and checks distribution fields over generalized phase space.
#[derive(Debug, Parser)]
#[command(name = "vlasov-chain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the initial state and its summary.
    State(Common),
    /// Evolve the state, writing snapshots and a time series.
    Evolve(Common),
    /// Evolve and evaluate the requested residual checks.
    Check(Common),
    /// Evolve and emit H, f0, f0_minus and residual series.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted KEY=VALUE override, applied before validation. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (&'static str, Common) {
        match self {
            Command::State(c) => ("state", c),
            Command::Evolve(c) => ("evolve", c),
            Command::Check(c) => ("check", c),
            Command::Report(c) => ("report", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, common) = cli.command.split();
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(1);
        }
    };
    let mut overrides = common.overrides;
    overrides.push(format!("scenario={scenario}"));
    if let Some(out) = &common.out {
        overrides.push(format!("output={}", serde_string(out)));
    }
    let cfg = match parse_config(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(code(&RunError::Chain(e)));
        }
    };
    match run(&cfg) {
        Ok(a) => {
            for f in &a.files {
                println!("{}", f.display());
            }
            for name in &a.flagged {
                eprintln!("warning: {name} exceeded its tolerance");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code(&e))
        }
    }
}

// Overrides parse their value as JSON first; quote paths so "1" or "true" stay strings.
fn serde_string(p: &std::path::Path) -> String {
    let s = p.to_string_lossy();
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn code(e: &RunError) -> u8 {
    e.exit_code() as u8
}
