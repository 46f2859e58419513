//! `tractghg`: tract emission inventories, VMT models and scenarios.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tractghg::{Error, ErrorClass};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tractghg", version, about = "Tract-level vehicle CO2e inventories and spatial VMT models")]
struct Cli {
    /// key = value run configuration; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for output files (default: ./out).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Log progress (-v) or debugging detail (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-tract CO2e inventories from vehicle census and/or road inventory.
    Inventory(InventoryArgs),
    /// Fit the VMT models and rank them by in-sample MSE.
    Fit(FitArgs),
    /// Apply a mode-share or built-environment intervention to a stored fit.
    Scenario(ScenarioArgs),
    /// Generate a synthetic lattice with a known SARAR data-generating process.
    Synth(SynthArgs),
    /// Write the spatial weights matrix as a sparse text file.
    WeightsExport(WeightsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InventoryMethod {
    Consumption,
    Production,
    Both,
}

#[derive(Debug, Args)]
struct InventoryArgs {
    /// Which inventory to compute.
    #[arg(long, value_enum)]
    method: Option<InventoryMethod>,
    /// Tract polygons (GeoJSON, `tract_id` property).
    #[arg(long, value_name = "FILE")]
    tracts: Option<PathBuf>,
    /// Road segments (GeoJSON LineStrings).
    #[arg(long, value_name = "FILE")]
    roads: Option<PathBuf>,
    /// Quarterly vehicle census CSV.
    #[arg(long, value_name = "FILE")]
    census: Option<PathBuf>,
    /// Emission-factor table overriding the built-in one.
    #[arg(long, value_name = "FILE")]
    ef_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Tract panel CSV.
    #[arg(long, value_name = "FILE")]
    panel: Option<PathBuf>,
    /// Model formula, e.g. "log_vmt ~ w_carpool + mapc + w_carpool:mapc".
    #[arg(long)]
    formula: Option<String>,
    /// File holding the formula on its first non-comment line.
    #[arg(long, value_name = "FILE")]
    model_spec: Option<PathBuf>,
    /// Weights scheme: knn:<k> or band:<distance> (default knn:8).
    #[arg(long, value_name = "SCHEME")]
    weights: Option<String>,
    /// Tract polygons supplying centroids when the panel has no
    /// centroid_x/centroid_y columns.
    #[arg(long, value_name = "FILE")]
    tracts: Option<PathBuf>,
    /// Comma-separated estimators (default: all seven).
    #[arg(long, value_name = "LIST")]
    estimators: Option<String>,
    /// Panel column defining fixed-effect groups (default region_id).
    #[arg(long, value_name = "COLUMN")]
    group: Option<String>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Fit JSON written by `tractghg fit`.
    #[arg(long, value_name = "FILE")]
    fit: Option<PathBuf>,
    /// Scenario file (key = value).
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// RNG seed (default 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Tracts per lattice side.
    #[arg(long)]
    side: Option<usize>,
    /// True spatial-lag parameter.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// True spatial-error parameter.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Error standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Weights scheme used to generate the outcome (default knn:8).
    #[arg(long, value_name = "SCHEME")]
    weights: Option<String>,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    /// Panel CSV with tract_id, centroid_x, centroid_y.
    #[arg(long, value_name = "FILE")]
    panel: Option<PathBuf>,
    /// Tract polygons; centroids are taken from the geometry.
    #[arg(long, value_name = "FILE")]
    tracts: Option<PathBuf>,
    /// Weights scheme: knn:<k> or band:<distance> (default knn:8).
    #[arg(long, value_name = "SCHEME")]
    weights: Option<String>,
}

fn path_flag(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn load_config(cli: &Cli) -> tractghg::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.set("out_dir", path_flag(cli.out_dir.clone()));
    Ok(cfg)
}

fn run(cli: Cli) -> tractghg::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Inventory(a) => {
            cfg.set("method", a.method.map(|m| format!("{m:?}").to_lowercase()));
            cfg.set("tracts", path_flag(a.tracts));
            cfg.set("roads", path_flag(a.roads));
            cfg.set("census", path_flag(a.census));
            cfg.set("ef_model", path_flag(a.ef_model));
            commands::inventory(&cfg)
        }
        Command::Fit(a) => {
            cfg.set("panel", path_flag(a.panel));
            cfg.set("formula", a.formula);
            cfg.set("model_spec", path_flag(a.model_spec));
            cfg.set("weights", a.weights);
            cfg.set("tracts", path_flag(a.tracts));
            cfg.set("estimators", a.estimators);
            cfg.set("group", a.group);
            commands::fit(&cfg)
        }
        Command::Scenario(a) => {
            cfg.set("fit", path_flag(a.fit));
            cfg.set("scenario", path_flag(a.scenario));
            commands::scenario(&cfg)
        }
        Command::Synth(a) => {
            cfg.set("seed", a.seed.map(|v| v.to_string()));
            cfg.set("side", a.side.map(|v| v.to_string()));
            cfg.set("gamma", a.gamma.map(|v| v.to_string()));
            cfg.set("lambda", a.lambda.map(|v| v.to_string()));
            cfg.set("sigma", a.sigma.map(|v| v.to_string()));
            cfg.set("weights", a.weights);
            commands::synth(&cfg)
        }
        Command::WeightsExport(a) => {
            cfg.set("panel", path_flag(a.panel));
            cfg.set("tracts", path_flag(a.tracts));
            cfg.set("weights", a.weights);
            commands::weights_export(&cfg)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::Consistency => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Numerical { trace, .. } = &e {
                if !trace.is_empty() {
                    eprintln!("search trace (parameter, objective):");
                    for (x, f) in trace {
                        eprintln!("  {x:.6} {f:.9e}");
                    }
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
