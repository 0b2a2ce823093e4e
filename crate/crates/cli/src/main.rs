//! `robust-amput`: price, hedge and verify the robust bound on a put that may
//! be exercised at one of two dates.
//!
//! The main output goes to stdout unless `--out DIR` is given, in which case
//! every file of the command is written there. The human summary always
//! goes to stderr.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::{Flags, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "robust-amput", version, about = "Robust bounds for a two-date American put")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Highest model-based price, its region and the exercise threshold.
    Price(Flags),
    /// The cheapest superhedge, its cost and the duality gap.
    Hedge(Flags),
    /// The left-curtain map `x,f,g` and its discrete transport plan.
    Coupling(Flags),
    /// Region and price over a grid of strikes with K2 < K1.
    RegionMap(Flags),
    /// Price, hedge and LP oracle side by side, with pass/fail gates.
    Verify(Flags),
    /// Paths from the extremal model with payoff and hedge value per path.
    Simulate(Flags),
    /// Normalize the input laws to measure JSON and test convex order.
    Ingest(Flags),
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Price(f)
            | Command::Hedge(f)
            | Command::Coupling(f)
            | Command::RegionMap(f)
            | Command::Verify(f)
            | Command::Simulate(f)
            | Command::Ingest(f) => f,
        }
    }
}

fn set_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("ROBUST_AMPUT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Input(format!("ROBUST_AMPUT_THREADS must be a positive integer, got `{v}`")))?;
        robust_amput::exec::limit_threads(n);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(Output, RunConfig), CliError> {
    set_threads()?;
    let cfg = RunConfig::resolve(cli.command.flags())?;
    let out = match &cli.command {
        Command::Price(_) => commands::price_cmd(&cfg),
        Command::Hedge(_) => commands::hedge_cmd(&cfg),
        Command::Coupling(_) => commands::coupling_cmd(&cfg),
        Command::RegionMap(_) => commands::region_map_cmd(&cfg),
        Command::Verify(_) => commands::verify_cmd(&cfg),
        Command::Simulate(_) => commands::simulate_cmd(&cfg),
        Command::Ingest(_) => commands::ingest_cmd(&cfg),
    }?;
    Ok((out, cfg))
}

fn emit(out: &Output, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, body) in &out.files {
                std::fs::write(dir.join(name), body)?;
            }
            let names: Vec<&str> = out.files.iter().map(|f| f.0).collect();
            eprint!("{}", out.summary);
            eprintln!("wrote {} to {}", names.join(", "), dir.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let written = match out.files.first() {
                Some((_, body)) => stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()),
                None => Ok(()),
            };
            // a closed pipe (`| head`) is the reader's choice, not an error
            match written {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
            eprint!("{}", out.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|(out, cfg)| {
        emit(&out, &cfg)?;
        match out.failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robust-amput: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
