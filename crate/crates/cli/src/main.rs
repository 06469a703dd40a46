//! `ambulate`: synthesise or import recordings, train a decoder, calibrate
//! thresholds, run the course and evaluate against chance.

mod commands;
mod failure;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::{Failure, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "ambulate",
    version,
    about = "Self-paced two-state EEG control, from recording to evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic recording.
    Synth(SynthArgs),
    /// Convert a CSV recording (one column per channel plus `label`).
    ImportCsv(ImportCsvArgs),
    /// Fit a decoding model and report its cross-validated accuracy.
    Train(TrainArgs),
    /// Derive hysteresis thresholds from a cued calibration stream.
    Calibrate(CalibrateArgs),
    /// Drive the course from a recorded stream or a synthetic subject.
    Run(RunArgs),
    /// Compare observed performance against a random-walk ensemble.
    Evaluate(EvaluateArgs),
    /// Render JSON reports as tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator key-value file; omitted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub erd_depth: Option<f64>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportCsvArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sample_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub recording: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-validation fold assignment seed.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = ambulate::decoder::DEFAULT_VARIANCE_KEEP)]
    pub variance_keep: f64,
    #[arg(long, default_value_t = ambulate::sigproc::DEFAULT_Z_THRESHOLD)]
    pub z_threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub cv_runs: usize,
    #[arg(long, default_value_t = 10)]
    pub cv_folds: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A labelled recording, or a text file with `[idle]` / `[walk]` sections.
    #[arg(long)]
    pub stream: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub thresholds: PathBuf,
    /// Recorded stream replayed open loop.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub input: Option<PathBuf>,
    /// Generator key-value file for a closed-loop synthetic subject.
    #[arg(long, requires = "seed")]
    pub synth: Option<PathBuf>,
    /// Subject seed for `--synth`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub course: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub adjust_idle: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub adjust_walk: f64,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub thresholds: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// `stops,time_s`; repeatable.
    #[arg(long, required = true)]
    pub observed: Vec<String>,
    #[arg(long)]
    pub report: PathBuf,
    /// Smoothing horizon applied to the uniform draws (1 = none).
    #[arg(long, default_value_t = ambulate::eval::DEFAULT_RW_HORIZON)]
    pub horizon: usize,
    #[arg(long)]
    pub course: Option<PathBuf>,
    #[arg(long, requires = "bandwidth_time")]
    pub bandwidth_stops: Option<f64>,
    #[arg(long, requires = "bandwidth_stops")]
    pub bandwidth_time: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub ensemble_out: Option<PathBuf>,
    /// Density grid as `stops,time_s,density` rows.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result: Result<(), Failure> = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::ImportCsv(a) => commands::import_csv(a),
        Command::Train(a) => commands::train(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Run(a) => commands::run(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ambulate: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
