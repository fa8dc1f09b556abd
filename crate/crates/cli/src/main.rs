mod commands;
mod config;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::control::ControlCommand;
use commands::interp::InterpArgs;
use commands::project::ProjectArgs;
use commands::surface::SurfaceArgs;
use commands::train::TrainArgs;

/// Probe neural network objectives along low-dimensional subspaces.
#[derive(Parser, Debug)]
#[command(name = "landscape-probe", version, about)]
struct Cli {
    /// Worker threads; also read from LP_THREADS. Results do not depend on
    /// the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network and record parameter snapshots.
    Train(TrainArgs),
    /// Evaluate the objective along a straight line between two points.
    Interp(InterpArgs),
    /// Project a trajectory onto its initial-to-solution chord.
    Project(ProjectArgs),
    /// Scan the objective over a two-dimensional slice.
    Surface(SurfaceArgs),
    /// Synthetic baselines with known geometry.
    #[command(subcommand)]
    Control(ControlCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("LP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            // Ignore the error: the global pool can only be set once and a
            // repeat call changes nothing.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }

    let result = match &cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Interp(args) => commands::interp::run(args),
        Command::Project(args) => commands::project::run(args),
        Command::Surface(args) => commands::surface::run(args),
        Command::Control(cmd) => commands::control::run(cmd),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
