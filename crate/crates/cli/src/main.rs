//! `zonetrack`: generate a building, simulate data, train, track, evaluate.
//!
//! Every run is determined by its arguments and input files. Randomness
//! flows from `--seed` through named sub-streams, and every artifact records
//! the seed plus a digest of the arguments that produced it.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "zonetrack", version, about = "Zone-level indoor tracking from BLE signal strength")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Building file (zones and adjacency, JSON).
    #[arg(long, global = true, default_value = "building.json")]
    #[serde(skip)]
    building: PathBuf,

    /// Sensor layout file (JSON).
    #[arg(long, global = true, default_value = "layout.json")]
    #[serde(skip)]
    layout: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Generate a random connected building and its sensor layout.
    GenBuilding(GenBuildingArgs),
    /// Simulate single-zone sessions, a held-out test tag and random walks.
    GenData(GenDataArgs),
    /// Train the network on simulated sessions.
    Train(TrainArgs),
    /// Track tags through a frame stream, one decision per second.
    Track(TrackArgs),
    /// Score a model on the test tag and the walks.
    Evaluate(EvaluateArgs),
    /// Sweep lookback, k or sensor density.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Preset {
    /// 20 zones, 25 sensors, 1 floor.
    Desk,
    /// 115 zones, 142 sensors, 3 floors, 215 adjacent pairs.
    Paper,
}

#[derive(Debug, Args, Serialize)]
struct GenBuildingArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Overrides the preset's zone count.
    #[arg(long)]
    zones: Option<usize>,
    #[arg(long)]
    sensors: Option<usize>,
    #[arg(long)]
    floors: Option<usize>,
    /// Adjacent pairs; defaults to the preset's, scaled to the zone count.
    #[arg(long)]
    edges: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    /// Output directory.
    #[arg(long, default_value = "data")]
    #[serde(skip)]
    out: PathBuf,
    /// Tags recorded for training and validation.
    #[arg(long, default_value_t = 6)]
    tags: usize,
    /// Seconds recorded per tag and zone.
    #[arg(long, default_value_t = 120.0)]
    session_seconds: f64,
    #[arg(long, default_value_t = 5)]
    walks: usize,
    #[arg(long, default_value_t = 1200.0)]
    walk_seconds: f64,
    /// Mean seconds a walking tag stays in a zone.
    #[arg(long, default_value_t = 75.0)]
    dwell: f64,
    /// Propagation parameters (JSON); built-in defaults otherwise.
    #[arg(long)]
    #[serde(skip)]
    propagation: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RecipeArgs {
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    dense: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Steps per zone in a spliced training trajectory.
    #[arg(long, default_value_t = 25)]
    half_len: usize,
    /// Spliced trajectories per tag and adjacent pair.
    #[arg(long, default_value_t = 3)]
    per_pair: usize,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long, default_value = "data")]
    #[serde(skip)]
    data: PathBuf,
    #[arg(long, default_value = "model.bin")]
    #[serde(skip)]
    model: PathBuf,
    /// Per-epoch losses (CSV); defaults to the model path with `.loss.csv`.
    #[arg(long)]
    #[serde(skip)]
    loss_csv: Option<PathBuf>,
    /// Lookback used for the reported test accuracy.
    #[arg(long, default_value_t = 10)]
    lookback: usize,
    #[command(flatten)]
    recipe: RecipeArgs,
}

#[derive(Debug, Args, Serialize)]
struct TrackArgs {
    #[arg(long, default_value = "model.bin")]
    #[serde(skip)]
    model: PathBuf,
    /// Mobility parameter of the posterior constraint; 1 disables it.
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    #[arg(long, default_value_t = 10)]
    lookback: usize,
    /// Decisions file; standard output otherwise.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Frame stream (`timestamp,tag,s0,..`); `-` or absent reads standard input.
    #[serde(skip)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[arg(long, default_value = "model.bin")]
    #[serde(skip)]
    model: PathBuf,
    #[arg(long, default_value = "data")]
    #[serde(skip)]
    data: PathBuf,
    /// k values to track the walks with.
    #[arg(long, value_delimiter = ',', default_value = "1,40")]
    k: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    lookback: usize,
    /// Metrics CSV; the table goes to standard output either way.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Axis {
    Lookback,
    K,
    Density,
}

#[derive(Debug, Args, Serialize)]
struct AblateArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    #[arg(long, default_value = "data")]
    #[serde(skip)]
    data: PathBuf,
    /// Trained model, for the lookback and k axes.
    #[arg(long, default_value = "model.bin")]
    #[serde(skip)]
    model: PathBuf,
    /// Axis values; each axis has its own defaults.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Lookbacks for the k axis; also the lookback of the density axis.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    lookbacks: Vec<usize>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[command(flatten)]
    recipe: RecipeArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
