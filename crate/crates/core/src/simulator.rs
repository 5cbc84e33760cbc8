//! Monte Carlo enrollment simulation.
//!
//! Every open site enrolls as an independent homogeneous Poisson process with
//! rate `psm`, so the study as a whole is a Poisson process whose intensity is
//! `psm` times the number of open sites. Arrivals are generated by time
//! change: with cumulative intensity `L(t) = psm * sum_j (t - u_j)^+`, the
//! k-th arrival is `L^-1(E_1 + ... + E_k)` for unit exponentials `E_i`.
//! Adding a site raises `L` everywhere, so under a shared stream every
//! arrival time can only move earlier.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::accrual::sample_psm;
use crate::activation::project_activation;
use crate::domain::{
    AccrualModel, ActivationMode, CountryActivationProfile, CurvePoint, ForecastSummary, ReplicateOutcome, Scenario,
    SiteSchedule,
};
use crate::error::{Error, Result};
use crate::seed::stream;
use crate::stats::quantile_sorted;

/// Site-months a site opening at `u_open` contributes to `[u1, u2]`:
/// `max(u2, u_open) - max(u1, u_open)`.
pub fn exposure(u1: f64, u2: f64, u_open: f64) -> Result<f64> {
    if u1 > u2 {
        return Err(Error::invalid("u1", format!("window start {u1} is after its end {u2}")));
    }
    Ok(u2.max(u_open) - u1.max(u_open))
}

/// Piecewise-linear cumulative intensity of the superposed site processes.
struct CumulativeIntensity {
    psm: f64,
    /// Sorted opening months.
    opens: Vec<f64>,
    /// `prefix[k]` = sum of the first k opening months.
    prefix: Vec<f64>,
}

impl CumulativeIntensity {
    fn new(schedule: &SiteSchedule, psm: f64) -> Self {
        let mut opens: Vec<f64> = schedule.open_months().collect();
        opens.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(opens.len() + 1);
        prefix.push(0.0);
        for &u in &opens {
            prefix.push(prefix.last().unwrap() + u);
        }
        Self { psm, opens, prefix }
    }

    fn at_open_count(&self, t: f64, k: usize) -> f64 {
        self.psm * (k as f64 * t - self.prefix[k])
    }

    /// Number of sites open at `t`.
    fn open_count(&self, t: f64) -> usize {
        self.opens.partition_point(|&u| u <= t)
    }

    fn at(&self, t: f64) -> f64 {
        self.at_open_count(t, self.open_count(t))
    }
}

/// Walks `L^-1` for an increasing sequence of targets.
struct Inverse<'a> {
    intensity: &'a CumulativeIntensity,
    /// Sites open on the current segment.
    k: usize,
}

impl<'a> Inverse<'a> {
    fn new(intensity: &'a CumulativeIntensity) -> Self {
        Self { intensity, k: 0 }
    }

    /// Smallest `t` with `L(t) = s`, for `s > 0` and non-decreasing calls.
    fn time_of(&mut self, s: f64) -> f64 {
        let li = self.intensity;
        let m = li.opens.len();
        // Advance while the next opening still lies at or below level s.
        while self.k < m && (self.k == 0 || li.at_open_count(li.opens[self.k], self.k) < s) {
            self.k += 1;
        }
        // On the segment with k open sites, L(t) = psm * (k t - prefix_k).
        let k = self.k;
        let t = (s / li.psm + li.prefix[k]) / k as f64;
        // Guard against rounding pulling the time before the segment start.
        t.max(li.opens[k - 1])
    }
}

fn month_ends(horizon: f64) -> Vec<f64> {
    let n = horizon.ceil().max(1.0) as usize;
    (1..=n).map(|m| (m as f64).min(horizon)).collect()
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Simulates arrivals over `[0, horizon]` for one realized schedule.
///
/// The first `target` arrivals are placed exactly; arrivals after the
/// target only feed the monthly tallies and are drawn as Poisson counts per
/// month, which has the same distribution.
pub fn simulate_replicate<R: Rng + ?Sized>(
    schedule: &SiteSchedule,
    psm: f64,
    target: u64,
    horizon: f64,
    rng: &mut R,
) -> Result<ReplicateOutcome> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(
            "horizon_months",
            format!("must be positive, got {horizon}"),
        ));
    }
    if !(psm.is_finite() && psm >= 0.0) {
        return Err(Error::invalid("psm", format!("must be a non-negative rate, got {psm}")));
    }
    if target == 0 {
        return Err(Error::invalid("target_enrollment", "must be at least 1"));
    }
    let ends = month_ends(horizon);
    if psm == 0.0 || schedule.is_empty() {
        return Ok(ReplicateOutcome {
            fsfd_month: None,
            lsfd_month: None,
            total_enrolled: 0,
            monthly_cumulative: vec![0; ends.len()],
        });
    }

    let intensity = CumulativeIntensity::new(schedule, psm);
    let level_at_horizon = intensity.at(horizon);

    // Levels (on the cumulative-intensity scale) of the first `target` arrivals.
    let mut levels: Vec<f64> = Vec::new();
    let mut s = 0.0;
    while (levels.len() as u64) < target {
        let e: f64 = rng.sample(Exp1);
        s += e;
        if s > level_at_horizon {
            break;
        }
        levels.push(s);
    }

    let mut inverse = Inverse::new(&intensity);
    let fsfd_month = levels.first().map(|&l| inverse.time_of(l));
    let reached = levels.len() as u64 == target;
    let lsfd_month = if reached {
        let last = *levels.last().unwrap();
        Some(inverse.time_of(last))
    } else {
        None
    };

    let mut monthly_cumulative = Vec::with_capacity(ends.len());
    let mut head_idx = 0usize;
    let mut tail_total = 0u64;
    let mut prev_level: f64 = 0.0;
    let tail_start = if reached {
        *levels.last().unwrap()
    } else {
        f64::INFINITY
    };
    for &end in &ends {
        let level = intensity.at(end);
        while head_idx < levels.len() && levels[head_idx] <= level {
            head_idx += 1;
        }
        let lo = prev_level.max(tail_start);
        if level > lo {
            tail_total += poisson_count(level - lo, rng);
        }
        prev_level = level;
        monthly_cumulative.push(head_idx as u64 + tail_total);
    }
    let total_enrolled = *monthly_cumulative.last().expect("at least one month");
    Ok(ReplicateOutcome {
        fsfd_month,
        lsfd_month,
        total_enrolled,
        monthly_cumulative,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForecastOptions {
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
    pub keep_schedules: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    /// Indexed by replicate.
    pub replicates: Vec<ReplicateOutcome>,
    pub schedules: Option<Vec<SiteSchedule>>,
}

fn activation_label(country: &str) -> String {
    format!("activation/{country}")
}

/// Fitted inputs resolved against one scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    profiles: Vec<&'a CountryActivationProfile>,
    model: &'a AccrualModel,
}

impl<'a> Simulation<'a> {
    pub fn new(
        scenario: &'a Scenario,
        profiles: &'a [CountryActivationProfile],
        model: &'a AccrualModel,
    ) -> Result<Self> {
        let by_country: HashMap<&str, &CountryActivationProfile> = profiles.iter().map(|p| (p.country(), p)).collect();
        let missing: Vec<String> = scenario
            .countries()
            .iter()
            .filter(|c| !by_country.contains_key(c.country.as_str()))
            .map(|c| c.country.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingProfiles(missing));
        }
        let profiles: Vec<_> = scenario
            .countries()
            .iter()
            .map(|c| by_country[c.country.as_str()])
            .collect();
        let bootstraps = match scenario.mode() {
            ActivationMode::Fixed => false,
            ActivationMode::Perturbed => true,
            ActivationMode::Poisson => scenario.poisson_bootstrap_start(),
        };
        if bootstraps {
            for p in &profiles {
                if p.pairs().is_empty() {
                    return Err(Error::invalid(
                        "mode",
                        format!("country {} has no historical pairs to bootstrap", p.country()),
                    ));
                }
                if p.pairs().len() == 1 {
                    log::warn!(
                        "country {}: a single historical study; bootstrap collapses to its (start-up, gap) pair",
                        p.country()
                    );
                }
            }
        }
        Ok(Self {
            scenario,
            profiles,
            model,
        })
    }

    pub fn schedule(&self, index: u64) -> Result<SiteSchedule> {
        let s = self.scenario;
        let mut countries = Vec::with_capacity(self.profiles.len());
        for (c, profile) in s.countries().iter().zip(&self.profiles) {
            let mut rng = stream(s.seed(), index, &activation_label(&c.country));
            let opens = project_activation(profile, c.n_sites, s.mode(), s.poisson_bootstrap_start(), &mut rng)?;
            countries.push((c.country.clone(), opens));
        }
        SiteSchedule::from_countries(countries)
    }

    /// Rate used by replicate `index`.
    pub fn psm(&self, index: u64) -> f64 {
        let s = self.scenario;
        match (s.psm_override(), s.mode()) {
            (Some(psm), _) => psm,
            (None, ActivationMode::Fixed) => self.model.psm(),
            (None, _) => sample_psm(self.model, &mut stream(s.seed(), index, "psm")),
        }
    }

    /// Replicate `index`, a pure function of the scenario seed and the index.
    pub fn replicate(&self, index: u64) -> Result<(SiteSchedule, ReplicateOutcome)> {
        let s = self.scenario;
        let schedule = self.schedule(index)?;
        let psm = self.psm(index);
        let mut rng = stream(s.seed(), index, "arrivals");
        let outcome = simulate_replicate(&schedule, psm, s.target_enrollment(), s.horizon_months(), &mut rng)?;
        Ok((schedule, outcome))
    }

    pub fn run(&self, options: &ForecastOptions) -> Result<ForecastRun> {
        let n = self.scenario.replicates() as u64;
        let work = || -> Result<Vec<(SiteSchedule, ReplicateOutcome)>> {
            (0..n).into_par_iter().map(|b| self.replicate(b)).collect()
        };
        let results = match options.threads {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?
                .install(work)?,
            None => work()?,
        };
        let (schedules, replicates): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        Ok(ForecastRun {
            replicates,
            schedules: options.keep_schedules.then_some(schedules),
        })
    }
}

pub fn forecast(
    scenario: &Scenario,
    profiles: &[CountryActivationProfile],
    model: &AccrualModel,
) -> Result<ForecastRun> {
    forecast_with(scenario, profiles, model, &ForecastOptions::default())
}

pub fn forecast_with(
    scenario: &Scenario,
    profiles: &[CountryActivationProfile],
    model: &AccrualModel,
    options: &ForecastOptions,
) -> Result<ForecastRun> {
    Simulation::new(scenario, profiles, model)?.run(options)
}

fn finite(value: Option<f64>) -> Option<f64> {
    value.filter(|v| v.is_finite())
}

fn sorted_with_censoring(values: impl Iterator<Item = Option<f64>>) -> Vec<f64> {
    let mut v: Vec<f64> = values.map(|x| x.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Point prediction, prediction interval and enrollment-curve quantiles.
///
/// Censored replicates enter every quantile as `+inf`; a quantile that lands
/// on them is reported as absent. The point prediction is the median of
/// that extended sample, so it is absent once half or more of the
/// replicates are censored.
pub fn summarize_forecast(replicates: &[ReplicateOutcome], pi_level: f64) -> Result<ForecastSummary> {
    if replicates.is_empty() {
        return Err(Error::invalid("replicates", "nothing to summarize"));
    }
    if !(pi_level > 0.0 && pi_level < 1.0) {
        return Err(Error::invalid(
            "pi_level",
            format!("must lie strictly between 0 and 1, got {pi_level}"),
        ));
    }
    let p_low = (1.0 - pi_level) / 2.0;
    let p_high = 1.0 - p_low;

    let lsfd = sorted_with_censoring(replicates.iter().map(|r| r.lsfd_month));
    let fsfd = sorted_with_censoring(replicates.iter().map(|r| r.fsfd_month));
    let censored = replicates.iter().filter(|r| r.lsfd_month.is_none()).count();

    let n_months = replicates.iter().map(|r| r.monthly_cumulative.len()).max().unwrap_or(0);
    let mut column = Vec::with_capacity(replicates.len());
    let mut curve = Vec::with_capacity(n_months);
    for m in 0..n_months {
        column.clear();
        column.extend(replicates.iter().map(|r| {
            // Shorter series (different horizons) hold their final value.
            r.monthly_cumulative
                .get(m)
                .or(r.monthly_cumulative.last())
                .copied()
                .unwrap_or(0) as f64
        }));
        column.sort_by(f64::total_cmp);
        curve.push(CurvePoint {
            month: (m + 1) as f64,
            q_low: quantile_sorted(&column, p_low).unwrap(),
            q_median: quantile_sorted(&column, 0.5).unwrap(),
            q_high: quantile_sorted(&column, p_high).unwrap(),
        });
    }

    Ok(ForecastSummary {
        point_months: finite(quantile_sorted(&lsfd, 0.5)),
        pi_low_months: finite(quantile_sorted(&lsfd, p_low)),
        pi_high_months: finite(quantile_sorted(&lsfd, p_high)),
        fsfd_point: finite(quantile_sorted(&fsfd, 0.5)),
        fsfd_pi_low: finite(quantile_sorted(&fsfd, p_low)),
        fsfd_pi_high: finite(quantile_sorted(&fsfd, p_high)),
        censored_fraction: censored as f64 / replicates.len() as f64,
        curve,
    })
}
