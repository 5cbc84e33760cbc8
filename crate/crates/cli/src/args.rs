use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "enrollcast", version, about = "Clinical trial enrollment forecasting")]
pub struct Cli {
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the accrual model and country profiles and print them.
    Fit(FitArgs),
    /// Simulate a scenario and write its forecast summary.
    Forecast(ForecastArgs),
    /// Score predictions against realized durations.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic history with known parameters.
    Synth(SynthArgs),
    /// Serve the HTTP API over a history.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct HistoryArgs {
    /// Study totals: study_id,n_subjects,duration_months[,offset_override]
    #[arg(long)]
    pub studies: PathBuf,
    /// Site groups: study_id,country,n_sites[,group_open_month]
    #[arg(long)]
    pub site_groups: PathBuf,
    /// Site activations: study_id,country,activation_month
    #[arg(long)]
    pub activations: PathBuf,
    /// Opening gap in months per site for a country, as COUNTRY=GAP. Repeatable.
    #[arg(long = "gap-override", value_parser = parse_gap_override)]
    pub gap_overrides: Vec<(String, f64)>,
    /// Lower bound on the estimated dispersion.
    #[arg(long, default_value_t = 1.0)]
    pub dispersion_floor: f64,
}

fn parse_gap_override(s: &str) -> Result<(String, f64), String> {
    let (country, gap) = s
        .split_once('=')
        .ok_or_else(|| format!("expected COUNTRY=GAP, got {s:?}"))?;
    let gap: f64 = gap.trim().parse().map_err(|e| format!("gap for {country}: {e}"))?;
    Ok((country.trim().to_string(), gap))
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub history: HistoryArgs,
    /// Also write the fitted model and profiles as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub history: HistoryArgs,
    /// Scenario JSON.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Where to write the forecast summary JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Output does not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// study_id,actual_months,predicted_months,pi_low,pi_high
    #[arg(long)]
    pub predictions: PathBuf,
    /// Where to write the summary metrics JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub history: HistoryArgs,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Browser origin allowed by CORS, e.g. http://localhost:5173
    #[arg(long)]
    pub cors_origin: Option<String>,
    #[arg(long, default_value_t = enrollcast_service::DEFAULT_MAX_REPLICATES)]
    pub max_replicates: usize,
}
