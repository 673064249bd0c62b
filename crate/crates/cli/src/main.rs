mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use affect_core::neural::{BranchMode, CellKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "affect", version, about = "Affect recognition from skeleton motion")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "AFFECT_OUT", default_value = "affect-out")]
    out: PathBuf,
    /// Local feature variant (R0, R1, R0+M1, R1+M1) or a full set such as `R1+M1,M0`.
    #[arg(long, global = true)]
    variant: Option<String>,
    #[arg(long, global = true, value_parser = parse_branches)]
    branches: Option<BranchMode>,
    #[arg(long, global = true, value_parser = parse_cell)]
    cell: Option<CellKind>,
    #[arg(long, global = true)]
    augment: Option<Switch>,
    /// Parallel fold jobs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Dataset manifest of original samples.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Print the hierarchy, channel and frame summary of a BVH file.
    Inspect { bvh: PathBuf },
    /// Generate a labelled synthetic dataset.
    Synth,
    /// Write feature files for the configured variant.
    Extract,
    /// Write balancing synthetics and their manifest.
    Augment,
    /// Train one model on the whole dataset and save a checkpoint.
    Train,
    /// k-fold cross-validation of the configured model.
    Crossval,
    /// Cross-validate the configured grid and write the comparison table.
    Ablate,
    /// Render tables and plots from a metrics file.
    Report { metrics: PathBuf },
}

fn parse_branches(s: &str) -> Result<BranchMode, String> {
    s.parse().map_err(|e: affect_core::Error| e.to_string())
}

fn parse_cell(s: &str) -> Result<CellKind, String> {
    s.parse().map_err(|e: affect_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    let g = &cli.global;
    let overrides = Overrides {
        seed: g.seed,
        variant: g.variant.clone(),
        branches: g.branches,
        cell: g.cell,
        augment: g.augment.map(|s| matches!(s, Switch::On)),
        data: g.data.clone(),
    };
    let args: Vec<String> = std::env::args().collect();
    match commands::run(&cli.command, g.config.as_deref(), &overrides, &g.out, g.workers, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
