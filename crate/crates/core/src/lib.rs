//! Study-level enrollment forecasting for clinical trials at the planning
//! stage.
//!
//! The pipeline fits a patients-per-site-month accrual rate from historical
//! study totals ([`accrual`]), estimates per-country start-up times and
//! opening pace from site activation histories ([`activation`]), and then
//! simulates site openings and subject arrivals by Monte Carlo
//! ([`simulator`]) to give enrollment-duration predictions with prediction
//! intervals. [`evaluation`] scores those predictions against realized
//! durations.

pub mod accrual;
pub mod activation;
pub mod data_io;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod history;
pub mod seed;
pub mod simulator;
pub mod stats;

pub use accrual::{compute_offset, fit_accrual, fit_accrual_with, fit_intercept_irls, sample_psm, FitOptions};
pub use activation::{estimate_profiles, estimate_profiles_with, project_activation, ProfileOptions};
pub use domain::*;
pub use error::{Error, Result};
pub use evaluation::{evaluate_prediction, score_prediction, summarize_rows, DEFAULT_WINDOWS};
pub use history::{FittedHistory, HistoryPaths};
pub use simulator::{
    exposure, forecast, forecast_with, simulate_replicate, summarize_forecast, ForecastOptions, ForecastRun, Simulation,
};
