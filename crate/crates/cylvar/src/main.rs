//! Command-line driver: parses a TOML run configuration, checks that it
//! names the invoked subcommand, and executes it. Exit codes: 0 all checks
//! passed, 1 a check failed, 2 the configuration is invalid, 3 the solver
//! or an artifact write failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cylvar::config::{parse_config, CommandKind};
use cylvar::runner::{run, RunStatus};
use cylvar::Error;

#[derive(Parser)]
#[command(name = "cylvar", version, about = "Variational energies on long cylinders")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Audit seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one cylinder problem.
    Solve(RunArgs),
    /// Solve a family of cylinders and check the asymptotic claims.
    Sweep(RunArgs),
    /// Check the declared integrand constants on sampled gradient pairs.
    Audit(RunArgs),
    /// Run the one-dimensional source and coercive problems.
    Onedim(RunArgs),
}

impl Cmd {
    fn kind(&self) -> CommandKind {
        match self {
            Cmd::Solve(_) => CommandKind::Solve,
            Cmd::Sweep(_) => CommandKind::Sweep,
            Cmd::Audit(_) => CommandKind::Audit,
            Cmd::Onedim(_) => CommandKind::Onedim,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Cmd::Solve(a) | Cmd::Sweep(a) | Cmd::Audit(a) | Cmd::Onedim(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let args = cli.command.args();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if cfg.command != kind {
        eprintln!(
            "configuration is for `{}` but `{}` was invoked",
            cfg.command.word(),
            kind.word()
        );
        return ExitCode::from(2);
    }

    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    match run(&cfg, &out_dir, args.seed) {
        Ok(RunStatus::Pass) => {
            println!("pass (artifacts in {})", out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(RunStatus::CheckFailed) => {
            eprintln!("checks failed (see {})", out_dir.join("summary.txt").display());
            ExitCode::from(1)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(3)
        }
    }
}
