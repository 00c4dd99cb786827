use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use homharm_cli::report::Format;
use homharm_cli::run::{self, OracleMode, Options};
use homharm_cli::spec::parse_spec;
use homharm_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "homharm", version, about = "Harmonic invariant 3-forms on compact homogeneous spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Betti numbers, alignment, Casimir constants and per-(x, y) verdicts.
    Analyze(Common),
    /// Randomized closed-form vs oracle cross-check.
    Verify(Common),
    /// Betti numbers only.
    Betti(Common),
    /// One-parameter metric sweep from the spec's "sweep" section.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "on")]
    oracle: OracleMode,
    /// Include stage timings (makes the report non-deterministic).
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, c) = match &cli.command {
        Command::Analyze(c) => ("analyze", c),
        Command::Verify(c) => ("verify", c),
        Command::Betti(c) => ("betti", c),
        Command::Sweep(c) => ("sweep", c),
    };
    match execute(name, c) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("homharm: {err}");
            ExitCode::from(exit::INVALID as u8)
        }
    }
}

fn execute(name: &str, c: &Common) -> Result<i32, CliError> {
    let spec = parse_spec(&c.spec)?;
    let bundle_dir = c
        .out
        .as_ref()
        .and_then(|p| p.parent())
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let opts = Options {
        seed: c.seed,
        trials: c.trials,
        oracle: c.oracle,
        timings: c.timings,
        bundle_dir,
    };
    let report = match name {
        "analyze" => run::analyze(&spec, &opts)?,
        "verify" => run::verify(&spec, &opts)?,
        "betti" => run::betti(&spec, &opts)?,
        _ => run::sweep(&spec, &opts)?,
    };
    report.emit(c.format, c.out.as_deref())?;
    if let Some(b) = report.verify.as_ref().and_then(|v| v.bundle.as_ref()) {
        eprintln!("homharm: disagreement, repro bundle written to {b}");
    }
    Ok(if report.passed { exit::OK } else { exit::DISAGREEMENT })
}
