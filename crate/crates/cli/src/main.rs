//! `windcast` command-line front end.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "windcast",
    version,
    about = "Multi-station wind forecasting from observations and NWP"
)]
pub struct Cli {
    /// Flat key=value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic observation and NWP files.
    Synth(SynthArgs),
    /// Validate inputs, fill gaps and write the completed series.
    Prepare(PrepareArgs),
    /// Score candidate covariates and write the selection report.
    SelectCovariates(SelectArgs),
    /// Train the per-station networks for v, vx and vy.
    Train(TrainArgs),
    /// Forecast every creation time with trained checkpoints.
    Predict(PredictArgs),
    /// Run baselines and models over folds and seeds.
    Evaluate(EvaluateArgs),
    /// Lagged auto, cross and station correlations of one variable.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Default)]
pub struct Inputs {
    /// Observation CSV.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// NWP CSV.
    #[arg(long)]
    pub nwp: Option<PathBuf>,
}

/// Training and architecture overrides, named like the config keys.
#[derive(Args, Debug, Default)]
pub struct Tuning {
    #[arg(long = "lr_init", alias = "lr-init")]
    pub lr_init: Option<f64>,
    #[arg(long = "lr_factor", alias = "lr-factor")]
    pub lr_factor: Option<f64>,
    #[arg(long = "lr_patience", alias = "lr-patience")]
    pub lr_patience: Option<usize>,
    #[arg(long = "lr_min", alias = "lr-min")]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long = "early_stop_patience", alias = "early-stop-patience")]
    pub early_stop_patience: Option<usize>,
    #[arg(long = "max_epochs", alias = "max-epochs")]
    pub max_epochs: Option<usize>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forecast horizons.
    #[arg(long)]
    pub k: Option<usize>,
    /// History length.
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long = "fct_hour", alias = "fct-hour")]
    pub fct_hour: Option<u32>,
    #[arg(long = "lstm_hidden", alias = "lstm-hidden")]
    pub lstm_hidden: Option<usize>,
    #[arg(long = "future_multiplier", alias = "future-multiplier")]
    pub future_multiplier: Option<usize>,
    #[arg(long = "spatial_filters", alias = "spatial-filters")]
    pub spatial_filters: Option<usize>,
    #[arg(long = "spatial_kernel", alias = "spatial-kernel")]
    pub spatial_kernel: Option<usize>,
    /// Covariate selection threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "ridge_lambda", alias = "ridge-lambda")]
    pub ridge_lambda: Option<f64>,
    /// Floor speed forecasts at zero.
    #[arg(long = "clip_speed", alias = "clip-speed")]
    pub clip_speed: Option<bool>,
    /// Concurrent independent jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Tuning {
    pub fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        fn s<T: ToString>(x: &Option<T>) -> Option<String> {
            x.as_ref().map(ToString::to_string)
        }
        vec![
            ("lr_init", s(&self.lr_init)),
            ("lr_factor", s(&self.lr_factor)),
            ("lr_patience", s(&self.lr_patience)),
            ("lr_min", s(&self.lr_min)),
            ("batch", s(&self.batch)),
            ("early_stop_patience", s(&self.early_stop_patience)),
            ("max_epochs", s(&self.max_epochs)),
            ("seed", s(&self.seed)),
            ("k", s(&self.k)),
            ("w", s(&self.w)),
            ("fct_hour", s(&self.fct_hour)),
            ("lstm_hidden", s(&self.lstm_hidden)),
            ("future_multiplier", s(&self.future_multiplier)),
            ("spatial_filters", s(&self.spatial_filters)),
            ("spatial_kernel", s(&self.spatial_kernel)),
            ("threshold", s(&self.threshold)),
            ("ridge_lambda", s(&self.ridge_lambda)),
            ("clip_speed", s(&self.clip_speed)),
            ("jobs", s(&self.jobs)),
        ]
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub stations: usize,
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// First day, `YYYY-MM-DD`.
    #[arg(long, default_value = "2021-01-01")]
    pub start: String,
    #[arg(long = "mean-speed", default_value_t = 7.0)]
    pub mean_speed: f64,
    #[arg(long = "diurnal-amplitude", default_value_t = 1.5)]
    pub diurnal_amplitude: f64,
    #[arg(long = "ar-coefficient", default_value_t = 0.8)]
    pub ar_coefficient: f64,
    #[arg(long = "ar-noise", default_value_t = 0.15)]
    pub ar_noise: f64,
    #[arg(long = "regional-coefficient", default_value_t = 0.9)]
    pub regional_coefficient: f64,
    #[arg(long = "regional-noise", default_value_t = 0.5)]
    pub regional_noise: f64,
    #[arg(long = "spatial-strength", default_value_t = 1.0)]
    pub spatial_strength: f64,
    #[arg(long = "nwp-bias", default_value_t = 1.0)]
    pub nwp_bias: f64,
    #[arg(long = "nwp-noise", default_value_t = 0.1)]
    pub nwp_noise: f64,
    #[arg(long = "missing-rate", default_value_t = 0.0)]
    pub missing_rate: f64,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long = "out-dir", alias = "out_dir")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit on the first N complete days only.
    #[arg(long = "train-days", alias = "train_days")]
    pub train_days: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Checkpoint directory.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Covariate report from `select-covariates`; target-only when absent.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// temporal, spatial or ensemble.
    #[arg(long)]
    pub depth: Option<String>,
    /// Trailing complete days used for early stopping.
    #[arg(long = "validation-days", alias = "validation_days")]
    pub validation_days: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Prediction CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<String>,
    /// Earliest creation time, inclusive.
    #[arg(long)]
    pub from: Option<String>,
    /// Latest creation time, inclusive.
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Comma-separated roster, e.g. `persistence,nwp,mhstn-e+c`.
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated run seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// holdout, rolling or incremental.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Folds of the rolling and incremental protocols.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Intervals in the rolling window.
    #[arg(long)]
    pub window: Option<usize>,
    /// Train,validation,test day counts for the holdout protocol.
    #[arg(long = "holdout-days", alias = "holdout_days")]
    pub holdout_days: Option<String>,
    /// Metric report to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional prediction dump.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub variable: Option<String>,
    #[arg(long = "max-lag", alias = "max_lag")]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for each error category.
pub fn exit_code(e: &windcast::Error) -> u8 {
    match e.kind() {
        "io" => 3,
        "data" | "csv" | "json" => 4,
        "argument" => 5,
        _ => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}
