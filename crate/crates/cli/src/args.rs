use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "needle-sim", version, about = "Bevel-tip needle insertion simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario script and write the per-step trace.
    Run(RunArgs),
    /// Compare simulated needle shapes with measured ones.
    Eval(EvalArgs),
    /// Fit tissue parameters and bevel offset to measured shapes.
    Tune(TuneArgs),
    /// Host interactive sessions over HTTP and WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (.toml) or preset name.
    #[arg(long)]
    pub scenario: String,
    /// Script file with `[[script]]` entries; replaces the scenario's own script.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Trace output (NDJSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write an SVG of the final step.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Override the solver iteration cap.
    #[arg(long)]
    pub max_iterations: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Measured shape CSV; repeat once per insertion.
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    /// Trace file to evaluate (last step); one per `--gt`.
    #[arg(long, conflicts_with = "scenario")]
    pub trace: Vec<PathBuf>,
    /// Scenario to run live instead of reading a trace; one per `--gt`, or one for all.
    #[arg(long)]
    pub scenario: Vec<String>,
    /// Script file used with `--scenario`.
    #[arg(long, requires = "scenario")]
    pub script: Option<PathBuf>,
    /// Number of corresponding samples; defaults to the measured point count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Dataset manifest listing scenario / measured-shape pairs.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fitted scenario (TOML); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, env = "NEEDLE_SIM_BIND", default_value = "127.0.0.1:7070")]
    pub bind: String,
    /// Directory that receives each session's trace when it ends.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}
