use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tempered_cli::{load_config, plot, run_path, Failure};

#[derive(Parser)]
#[command(
    name = "engine",
    version,
    about = "Tempered SGMCMC and Gaussian-approximation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a run's manifest.json.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config and ENGINE_OUTPUT_ROOT.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Laplace precision from the data curvature alone.
        #[arg(long)]
        no_prior_precision: bool,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write .xy plot data and a gnuplot stub for a run directory.
    Plot { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: Result<(), Failure> = match cli.command {
        Command::Run {
            config,
            out,
            no_prior_precision,
        } => run_path(&config, out.as_deref(), no_prior_precision).map(|dir| {
            println!("{}", dir.display());
        }),
        Command::Validate { config } => load_config(&config).map(|cfg| {
            println!("ok: {}", cfg.experiment.name());
        }),
        Command::Plot { dir } => plot::emit_plot_data(&dir)
            .map_err(Failure::from)
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
