//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use enrollcast::data_io::{
    draw_trial_schedule, generate_synthetic_history, load_predictions, write_synthetic_history, SyntheticConfig,
    SyntheticCountry,
};
use enrollcast::seed::stream;
use enrollcast::stats::median;
use enrollcast::{
    compute_offset, fit_accrual, fit_intercept_irls, forecast, score_prediction, simulate_replicate,
    summarize_forecast, summarize_rows, ActivationMode, CountryActivationProfile, CountrySites, FitOptions,
    FittedHistory, HistoricalStudy, ProfileOptions, Scenario, Simulation, SiteGroup, DEFAULT_WINDOWS,
};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Check {
    let elapsed = started.elapsed();
    ensure(
        elapsed < budget,
        format!(
            "{detail}; {:.2}s of {:.0}s budget",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn reference_table(name: &str, error_median: f64, pi_median: f64, coverages: [usize; 4]) -> Check {
    let started = Instant::now();
    let preds = load_predictions(&fixture(name)).map_err(|e| e.to_string())?;
    let rows: Vec<_> = preds
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
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let s = summarize_rows(&rows).map_err(|e| e.to_string())?;
    let n = rows.len() as f64;
    let got = [s.coverage_pi, s.coverage_1mo, s.coverage_2mo, s.coverage_3mo];
    let want = coverages.map(|c| c as f64 / n);
    let detail = format!(
        "error median {:.3} (want {error_median}±0.1), PI length median {:.3} (want {pi_median}±0.1), coverages {:?} (want {:?}/7)",
        s.prediction_error_median,
        s.pi_length_median,
        got.map(|c| (c * n).round() as usize),
        coverages
    );
    let ok = (s.prediction_error_median - error_median).abs() <= 0.1
        && (s.pi_length_median - pi_median).abs() <= 0.1
        && got == want
        && rows.len() == 7;
    if !ok {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(1), detail)
}

fn offset_example() -> Check {
    let groups = vec![
        SiteGroup::new("A", 50, Some(0.0)).map_err(|e| e.to_string())?,
        SiteGroup::new("B", 20, Some(5.0)).map_err(|e| e.to_string())?,
    ];
    let study = HistoricalStudy::new("fig", 0, 10.0, groups, None).map_err(|e| e.to_string())?;
    let d = compute_offset(&study).map_err(|e| e.to_string())?;
    ensure(d == 600.0, format!("offset {d} site-months (want exactly 600)"))
}

fn closed_form_matches_irls() -> Check {
    let mut rng = stream(20_240_101, 0, "acceptance/irls");
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let s = rng.random_range(1..=10);
        let mut data: Vec<(u64, f64)> = (0..s)
            .map(|_| (rng.random_range(0..200), rng.random_range(1.0..500.0)))
            .collect();
        if data.iter().all(|(x, _)| *x == 0) {
            data[0].0 = 1;
        }
        let studies: Vec<_> = data
            .iter()
            .enumerate()
            .map(|(j, &(x, d))| HistoricalStudy::new(format!("P{i}S{j}"), x, 12.0, vec![], Some(d)).unwrap())
            .collect();
        let closed = fit_accrual(&studies).map_err(|e| e.to_string())?.intercept();
        let counts: Vec<f64> = data.iter().map(|(x, _)| *x as f64).collect();
        let offsets: Vec<f64> = data.iter().map(|(_, d)| *d).collect();
        let irls = fit_intercept_irls(&counts, &offsets).map_err(|e| e.to_string())?;
        worst = worst.max((closed - irls).abs());
    }
    ensure(
        worst < 1e-8,
        format!("largest |closed - IRLS| over 100 problems {worst:.2e} (want < 1e-8)"),
    )
}

fn bank(n_studies: usize, psm: f64, overdispersion: f64, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_studies,
        true_psm: psm,
        overdispersion,
        countries: vec![
            SyntheticCountry {
                name: "US".into(),
                t_mean: 3.0,
                gap_mean: 0.4,
                n_sites_range: [10, 30],
            },
            SyntheticCountry {
                name: "DE".into(),
                t_mean: 5.0,
                gap_mean: 1.0,
                n_sites_range: [3, 10],
            },
        ],
        duration_range: [12.0, 24.0],
        seed,
        t_jitter: 0.5,
        gap_jitter: 0.5,
    }
}

fn estimator_recovery() -> Check {
    let started = Instant::now();
    let h = generate_synthetic_history(&bank(200, 0.5, 2.0, 20_240_601)).map_err(|e| e.to_string())?;
    let m = fit_accrual(&h.studies).map_err(|e| e.to_string())?;
    let detail = format!(
        "psm {:.4} (want [0.45, 0.55]), dispersion {:.3} (want [1.4, 2.8])",
        m.psm(),
        m.dispersion()
    );
    if !((0.45..=0.55).contains(&m.psm()) && (1.4..=2.8).contains(&m.dispersion())) {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(5), detail)
}

fn simulator_calibration() -> Check {
    let started = Instant::now();
    let profiles = [CountryActivationProfile::new("US", 0.0, 1.0, vec![], 1).map_err(|e| e.to_string())?];
    let model = enrollcast::AccrualModel::new(0.0, 0.0, 1.0, 1).map_err(|e| e.to_string())?;
    let countries = vec![CountrySites {
        country: "US".into(),
        n_sites: 1,
    }];
    let scenario = Scenario::new(
        countries,
        1_000,
        10_000,
        0.95,
        ActivationMode::Fixed,
        7,
        10.0,
        Some(1.0),
        false,
    )
    .map_err(|e| e.to_string())?;
    let run = forecast(&scenario, &profiles, &model).map_err(|e| e.to_string())?;
    let totals: Vec<f64> = run.replicates.iter().map(|r| r.total_enrolled as f64).collect();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let detail = format!(
        "mean {mean:.4} (want [9.9, 10.1]), dispersion index {:.4} (want [0.9, 1.1])",
        var / mean
    );
    if !((9.9..=10.1).contains(&mean) && (0.9..=1.1).contains(&(var / mean))) {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(5), detail)
}

fn fitted(config: &SyntheticConfig) -> Result<FittedHistory, String> {
    let h = generate_synthetic_history(config).map_err(|e| e.to_string())?;
    FittedHistory::fit(
        &h.studies,
        &h.records,
        FitOptions::default(),
        &ProfileOptions::default(),
    )
    .map_err(|e| e.to_string())
}

fn countries(us: u32, de: u32) -> Vec<CountrySites> {
    vec![
        CountrySites {
            country: "US".into(),
            n_sites: us,
        },
        CountrySites {
            country: "DE".into(),
            n_sites: de,
        },
    ]
}

fn pi_calibration() -> Check {
    let started = Instant::now();
    let config = bank(40, 0.5, 1.0, 11);
    let history = fitted(&config)?;
    let trials = 200;
    let mut covered = 0;
    for k in 0..trials {
        let mut rng = stream(config.seed, k, "acceptance/truth");
        let (us, de) = (rng.random_range(8..=25), rng.random_range(2..=8));
        let target = rng.random_range(40..=200);
        let sites = countries(us, de);
        let schedule = draw_trial_schedule(&config, &sites, &mut rng).map_err(|e| e.to_string())?;
        let truth = simulate_replicate(&schedule, config.true_psm, target, 120.0, &mut rng)
            .map_err(|e| e.to_string())?
            .lsfd_month
            .unwrap_or(f64::INFINITY);
        let scenario = Scenario::new(
            sites,
            target,
            2000,
            0.95,
            ActivationMode::Perturbed,
            1_000 + k,
            120.0,
            None,
            false,
        )
        .map_err(|e| e.to_string())?;
        let run = forecast(&scenario, history.profiles(), history.model()).map_err(|e| e.to_string())?;
        let s = summarize_forecast(&run.replicates, 0.95).map_err(|e| e.to_string())?;
        let lo = s.pi_low_months.unwrap_or(f64::INFINITY);
        let hi = s.pi_high_months.unwrap_or(f64::INFINITY);
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    let detail = format!("coverage {coverage:.3} over {trials} trials at B = 2000 (want [0.90, 0.98])");
    if !(0.90..=0.98).contains(&coverage) {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(120), detail)
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_enrollcast"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let h = generate_synthetic_history(&bank(30, 0.5, 1.5, 5)).map_err(|e| e.to_string())?;
    write_synthetic_history(&h, d).map_err(|e| e.to_string())?;
    let scenario = serde_json::json!({
        "countries": [{"country": "US", "n_sites": 14}, {"country": "DE", "n_sites": 4}],
        "target_enrollment": 120,
        "replicates": 3000,
        "mode": "perturbed",
        "seed": 99
    });
    std::fs::write(d.join("scenario.json"), scenario.to_string()).map_err(|e| e.to_string())?;
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();
    let mut outputs = Vec::new();
    for (run, threads) in ["1", "1", "2", "4", "8"].iter().enumerate() {
        let out = p(&format!("forecast{run}.json"));
        run_cli(&[
            "forecast",
            "--studies",
            &p("studies.csv"),
            "--site-groups",
            &p("study_site_groups.csv"),
            "--activations",
            &p("activations.csv"),
            "--scenario",
            &p("scenario.json"),
            "--out",
            &out,
            "--threads",
            threads,
        ])?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    ensure(
        identical,
        format!(
            "{} runs with --threads 1, 1, 2, 4, 8: forecast.json {}",
            outputs.len(),
            if identical { "byte-identical" } else { "differs" }
        ),
    )
}

fn mode_ordering() -> Check {
    let history = fitted(&bank(40, 0.5, 1.5, 21))?;
    let mixes: [(u32, u32, u64); 7] = [
        (10, 3, 60),
        (20, 5, 150),
        (15, 8, 120),
        (25, 4, 220),
        (8, 2, 40),
        (30, 10, 300),
        (12, 6, 90),
    ];
    let mut lines = Vec::new();
    let mut all = true;
    for seed in 0..10u64 {
        let mut medians = [0.0; 2];
        for (slot, mode) in [ActivationMode::Fixed, ActivationMode::Perturbed]
            .into_iter()
            .enumerate()
        {
            let mut lengths = Vec::new();
            for &(us, de, target) in &mixes {
                let scenario = Scenario::new(countries(us, de), target, 1000, 0.95, mode, seed, 120.0, None, false)
                    .map_err(|e| e.to_string())?;
                let run = forecast(&scenario, history.profiles(), history.model()).map_err(|e| e.to_string())?;
                let s = summarize_forecast(&run.replicates, 0.95).map_err(|e| e.to_string())?;
                match (s.pi_low_months, s.pi_high_months) {
                    (Some(lo), Some(hi)) => lengths.push(hi - lo),
                    _ => lengths.push(f64::INFINITY),
                }
            }
            medians[slot] = median(&lengths).unwrap_or(f64::NAN);
        }
        all &= medians[1] >= medians[0];
        lines.push(format!("{:.2}/{:.2}", medians[1], medians[0]));
    }
    ensure(
        all,
        format!("median PI length perturbed/fixed per seed: {}", lines.join(" ")),
    )
}

fn monotonicity() -> Check {
    let history = fitted(&bank(40, 0.5, 1.5, 31))?;
    let mut checked = 0;
    for mode in [
        ActivationMode::Fixed,
        ActivationMode::Perturbed,
        ActivationMode::Poisson,
    ] {
        let base = Scenario::new(countries(12, 4), 120, 1000, 0.95, mode, 77, 120.0, None, false)
            .map_err(|e| e.to_string())?;
        for c in base.countries() {
            let more = base.with_sites(&c.country, c.n_sites + 1).map_err(|e| e.to_string())?;
            let a = Simulation::new(&base, history.profiles(), history.model()).map_err(|e| e.to_string())?;
            let b = Simulation::new(&more, history.profiles(), history.model()).map_err(|e| e.to_string())?;
            for i in 0..1000 {
                let before = a
                    .replicate(i)
                    .map_err(|e| e.to_string())?
                    .1
                    .lsfd_month
                    .unwrap_or(f64::INFINITY);
                let after = b
                    .replicate(i)
                    .map_err(|e| e.to_string())?
                    .1
                    .lsfd_month
                    .unwrap_or(f64::INFINITY);
                if after > before {
                    return Err(format!(
                        "{mode} mode, +1 site in {}: replicate {i} went {before} -> {after}",
                        c.country
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} paired replicates over 3 modes x 2 countries, none delayed"
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("reference table, fixed row", || {
            reference_table("reference_fixed.csv", -1.02, 8.46, [4, 1, 4, 6])
        }),
        ("reference table, perturbed row", || {
            reference_table("reference_perturbed.csv", -0.60, 9.78, [6, 2, 5, 5])
        }),
        ("exposure offset example", offset_example),
        ("closed form equals IRLS", closed_form_matches_irls),
        ("estimator recovery", estimator_recovery),
        ("simulator calibration", simulator_calibration),
        ("prediction interval calibration", pi_calibration),
        ("CLI determinism across threads", cli_determinism),
        ("mode ordering of PI length", mode_ordering),
        ("monotonicity in site count", monotonicity),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
