//! Command-line driver for the full offline/online workflow: mesh
//! generation, full-order snapshot runs, POD, Galerkin assembly, reduced
//! integration and evaluation.
//!
//! Exit codes are stable: 0 success, 2 missing input, 3 stale artifact,
//! 4 dimension error, 5 solver failure, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use podfv::Error;

use commands::Stage;

#[derive(Parser)]
#[command(name = "podfv", about = "Finite-volume POD-Galerkin reduced order modelling pipeline")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, default_value = "podfv.toml")]
    config: PathBuf,
    /// Worker threads for multi-run stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the channel mesh.
    MeshGen,
    /// Run the full-order case(s) and export snapshots and forces.
    HfRun,
    /// Build the POD basis from the recorded snapshots.
    Pod,
    /// Project the governing equations onto the basis.
    Assemble,
    /// Integrate the reduced system and export coefficients and forces.
    RomRun,
    /// Compare reduced and full-order outputs.
    Eval,
    /// Run every stage in order.
    Pipeline,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Stale(_) => 3,
        Error::Dimension(_) => 4,
        Error::Solver(_) | Error::Rom(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("podfv: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let stage = Stage::new(&cfg, cli.jobs);
    let result = match cli.command {
        Command::MeshGen => stage.mesh_gen(),
        Command::HfRun => stage.hf_run(),
        Command::Pod => stage.pod(),
        Command::Assemble => stage.assemble(),
        Command::RomRun => stage.rom_run(),
        Command::Eval => stage.eval(),
        Command::Pipeline => stage.pipeline(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("podfv: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
