//! `trpplan`: bound maps, Monte Carlo campaigns and densification runs from a
//! JSON config, with CSV/JSON outputs and a run manifest.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "trpplan",
    version,
    about = "TRP deployment evaluation for indoor DL-TDOA positioning"
)]
struct Cli {
    /// Worker threads for grid and campaign evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// CRLB / GDOP maps for every configured deployment.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        /// Grid cell size in meters; overrides `bounds.cell_size_m`.
        #[arg(long)]
        cells: Option<f64>,
    },
    /// Monte Carlo campaign for every configured deployment.
    Campaign {
        #[command(flatten)]
        run: RunArgs,
        /// Campaign seed; overrides `campaign.seed`, which overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Base campaign plus worst-UE-targeted densification steps.
    Densify {
        #[command(flatten)]
        run: RunArgs,
        /// Campaign seed; overrides `campaign.seed`, which overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of densification steps; overrides `densify.k_max`.
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Serves the HTTP API (and optionally the web UI files) until ctrl-c.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve { bind, static_dir } => commands::serve(bind, static_dir, cli.threads),
        command => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cli.threads)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            match command {
                Command::Bounds { run, cells } => commands::bounds(&run.config, &run.out, cells),
                Command::Campaign { run, seed } => commands::campaign(&run.config, &run.out, seed),
                Command::Densify { run, seed, k_max } => commands::densify(&run.config, &run.out, seed, k_max),
                Command::Serve { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
