#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{Command, RunError, Which};
use config::Config;
use output::{hex_digest, OutDir};

#[derive(Parser)]
#[command(name = "cashinv", version, about = "Inventory ordering with borrowing and deposits")]
struct Cli {
    /// TOML or JSON run configuration; the built-in reference setup when absent.
    #[arg(long, global = true, env = "CASHINV_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "CASHINV_OUT", default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, env = "CASHINV_SEED")]
    seed: Option<u64>,

    #[arg(long, global = true, env = "CASHINV_PATHS")]
    paths: Option<usize>,

    /// Multiplies the grid node counts.
    #[arg(long, global = true, env = "CASHINV_GRID_SCALE")]
    grid_scale: Option<f64>,

    /// Bisection tolerance for the thresholds.
    #[arg(long, global = true, env = "CASHINV_EPSILON")]
    epsilon: Option<f64>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Value function, policy and thresholds of every period.
    Solve,
    /// Comparison tables against the myopic policies and the upper bound.
    Tables {
        #[arg(long, value_enum, default_value = "gap")]
        which: Which,
    },
    /// Data for the order curve, value surface and selling-back curves.
    Figures,
    /// Monte Carlo of the optimal and myopic policies.
    Simulate,
}

fn load(cli: &Cli) -> Result<Config, RunError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Config::parse(&text, path)?
        }
        None => Config::reference(),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    if let Some(paths) = cli.paths {
        config.simulation.paths = paths;
    }
    if let Some(scale) = cli.grid_scale {
        config.solver.grid_scale = scale;
    }
    if let Some(eps) = cli.epsilon {
        config.solver.epsilon = eps;
    }
    config.check()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let config = load(cli)?;
    let command = match cli.command {
        Sub::Solve => Command::Solve,
        Sub::Tables { which } => Command::Tables(which),
        Sub::Figures => Command::Figures,
        Sub::Simulate => Command::Simulate,
    };
    let resolved = serde_json::to_vec(&config).map_err(std::io::Error::other)?;
    let out = OutDir::create(&cli.out)?;
    let manifest = commands::run(command, &config, hex_digest(&resolved), out)?;
    for f in &manifest.outputs {
        println!("{} ({} rows)", cli.out.join(&f.file).display(), f.rows);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
