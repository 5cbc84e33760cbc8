use std::collections::BTreeMap;
use std::net::SocketAddr;

use anyhow::{bail, Context, Result};
use enrollcast::data_io::{
    generate_synthetic_history, load_predictions, read_json, write_json, write_synthetic_history, SyntheticConfig,
};
use enrollcast::evaluation::render_table;
use enrollcast::{
    forecast_with, score_prediction, summarize_forecast, summarize_rows, FitOptions, FittedHistory, ForecastOptions,
    HistoryPaths, ProfileOptions, Scenario, ScenarioDraft, DEFAULT_WINDOWS,
};
use enrollcast_service::ServiceConfig;

use crate::args::{EvaluateArgs, FitArgs, ForecastArgs, HistoryArgs, ServeArgs, SynthArgs};
use crate::report;

impl HistoryArgs {
    fn paths(&self) -> HistoryPaths {
        HistoryPaths {
            studies: self.studies.clone(),
            site_groups: self.site_groups.clone(),
            activations: self.activations.clone(),
        }
    }

    fn options(&self) -> (FitOptions, ProfileOptions) {
        let fit = FitOptions {
            dispersion_floor: self.dispersion_floor,
        };
        let profile = ProfileOptions {
            gap_overrides: self.gap_overrides.iter().cloned().collect::<BTreeMap<_, _>>(),
        };
        (fit, profile)
    }

    fn load(&self) -> Result<FittedHistory> {
        let (fit, profile) = self.options();
        Ok(FittedHistory::load(&self.paths(), fit, &profile)?)
    }
}

pub fn fit(args: FitArgs) -> Result<()> {
    let history = args.history.load()?;
    print!("{}", report::fitted(&history));
    if let Some(out) = &args.out {
        write_json(&history, out)?;
    }
    Ok(())
}

pub fn forecast(args: ForecastArgs) -> Result<()> {
    let mut draft: ScenarioDraft =
        read_json(&args.scenario).with_context(|| format!("reading scenario {}", args.scenario.display()))?;
    if args.seed.is_some() {
        draft.seed = args.seed;
    }
    if draft.seed.is_none() {
        bail!("invalid seed: a seed is required; pass --seed or set \"seed\" in the scenario");
    }
    let scenario = Scenario::try_from(draft)?;
    let history = args.history.load()?;
    log::info!(
        "accrual model: psm {:.4} (se of log rate {:.4}, dispersion {:.3})",
        history.model().psm(),
        history.model().intercept_se(),
        history.model().dispersion()
    );
    let options = ForecastOptions {
        threads: args.threads,
        keep_schedules: false,
    };
    let run = forecast_with(&scenario, history.profiles(), history.model(), &options)?;
    let summary = summarize_forecast(&run.replicates, scenario.pi_level())?;
    write_json(&summary, &args.out)?;
    if summary.censored_fraction > 0.5 {
        log::warn!(
            "{:.1}% of replicates did not reach the target within {} months",
            summary.censored_fraction * 100.0,
            scenario.horizon_months()
        );
    }
    print!("{}", report::forecast(&scenario, &summary));
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let predictions = load_predictions(&args.predictions)?;
    if predictions.is_empty() {
        bail!("{}: no predictions to evaluate", args.predictions.display());
    }
    let rows = predictions
        .iter()
        .map(|p| {
            score_prediction(
                &p.study_id,
                p.actual_months,
                p.predicted_months,
                p.pi_low,
                p.pi_high,
                DEFAULT_WINDOWS,
            )
        })
        .collect::<enrollcast::Result<Vec<_>>>()?;
    let summary = summarize_rows(&rows)?;
    write_json(&summary, &args.out)?;
    print!("{}", render_table(&rows, &summary));
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut config: serde_json::Value =
        read_json(&args.config).with_context(|| format!("reading config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        match config.as_object_mut() {
            Some(obj) => {
                obj.insert("seed".into(), seed.into());
            }
            None => bail!("{}: configuration must be a JSON object", args.config.display()),
        }
    }
    if config.get("seed").is_none() {
        bail!("invalid seed: a seed is required; pass --seed or set \"seed\" in the config");
    }
    let config: SyntheticConfig = serde_json::from_value(config).context("invalid synthetic config")?;
    let history = generate_synthetic_history(&config)?;
    write_synthetic_history(&history, &args.out_dir)?;
    println!(
        "wrote {} studies and {} activation records to {}",
        history.studies.len(),
        history.records.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("invalid listen address {}:{}", args.host, args.port))?;
    let (fit, profile) = args.history.options();
    let paths = args.history.paths();
    let config = ServiceConfig {
        cors_origin: args.cors_origin,
        max_replicates: args.max_replicates,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        enrollcast_service::run(listener, paths, fit, profile, config, shutdown).await?;
        Ok(())
    })
}
