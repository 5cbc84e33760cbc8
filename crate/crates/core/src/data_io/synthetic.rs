//! Synthetic historical data with known ground truth.
//!
//! Each study draws an enrollment duration, and for every configured country
//! a start-up time and an opening spacing jittered around the country means.
//! Sites open on that linear grid; sites that would open after the study
//! closed are dropped. Subject counts are gamma-mixed Poisson with mean
//! `true_psm * site-months` and variance `overdispersion * mean`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{ActivationRecord, CountrySites, HistoricalStudy, SiteGroup, SiteSchedule};
use crate::error::{Error, Result};
use crate::seed::{stream, SimRng};

fn default_jitter() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCountry {
    pub name: String,
    /// Mean start-up, months from time zero to the first activation.
    pub t_mean: f64,
    /// Mean spacing between openings, months per site.
    pub gap_mean: f64,
    /// Inclusive range of sites the country opens per study.
    pub n_sites_range: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_studies: usize,
    pub true_psm: f64,
    /// Variance-to-mean ratio of subject counts given exposure; 1 is Poisson.
    pub overdispersion: f64,
    pub countries: Vec<SyntheticCountry>,
    /// Inclusive range of whole-study enrollment durations in months.
    pub duration_range: [f64; 2],
    pub seed: u64,
    /// Relative half-width of the uniform start-up jitter.
    #[serde(default = "default_jitter")]
    pub t_jitter: f64,
    /// Relative half-width of the uniform spacing jitter.
    #[serde(default = "default_jitter")]
    pub gap_jitter: f64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("true_psm", self.true_psm)?;
        if !(self.overdispersion.is_finite() && self.overdispersion >= 1.0) {
            return Err(Error::invalid("overdispersion", "must be at least 1"));
        }
        let [lo, hi] = self.duration_range;
        positive("duration_range", lo)?;
        if !(hi.is_finite() && hi >= lo) {
            return Err(Error::invalid(
                "duration_range",
                "upper bound must be at least the lower bound",
            ));
        }
        for (field, j) in [("t_jitter", self.t_jitter), ("gap_jitter", self.gap_jitter)] {
            if !(0.0..1.0).contains(&j) {
                return Err(Error::invalid(field, format!("must lie in [0, 1), got {j}")));
            }
        }
        if self.countries.is_empty() {
            return Err(Error::invalid("countries", "at least one country is required"));
        }
        for c in &self.countries {
            positive("t_mean", c.t_mean)?;
            positive("gap_mean", c.gap_mean)?;
            let [a, b] = c.n_sites_range;
            if a == 0 || b < a {
                return Err(Error::invalid(
                    "n_sites_range",
                    format!("country {}: need 1 <= low <= high", c.name),
                ));
            }
            // The first site of every country must open before the shortest study ends.
            if c.t_mean * (1.0 + self.t_jitter) >= lo {
                return Err(Error::invalid(
                    "duration_range",
                    format!(
                        "shortest duration {lo} does not cover the latest start-up of {}",
                        c.name
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryTruth {
    pub name: String,
    pub t_mean: f64,
    pub gap_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub true_psm: f64,
    pub overdispersion: f64,
    pub countries: Vec<CountryTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHistory {
    pub studies: Vec<HistoricalStudy>,
    pub records: Vec<ActivationRecord>,
    pub truth: SyntheticTruth,
}

fn jittered<R: Rng + ?Sized>(mean: f64, jitter: f64, rng: &mut R) -> f64 {
    if jitter == 0.0 {
        mean
    } else {
        mean * (1.0 + jitter * rng.random_range(-1.0..=1.0))
    }
}

/// Start-up and spacing for one country in one study.
fn draw_country<R: Rng + ?Sized>(config: &SyntheticConfig, c: &SyntheticCountry, rng: &mut R) -> (f64, f64) {
    let t = jittered(c.t_mean, config.t_jitter, rng);
    let gap = jittered(c.gap_mean, config.gap_jitter, rng);
    (t, gap)
}

/// Gamma-mixed Poisson with the given mean and variance `dispersion * mean`.
pub fn overdispersed_count<R: Rng + ?Sized>(mean: f64, dispersion: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let rate = if dispersion > 1.0 {
        let scale = dispersion - 1.0;
        Gamma::new(mean / scale, scale)
            .expect("positive gamma parameters")
            .sample(rng)
    } else {
        mean
    };
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

pub fn generate_synthetic_history(config: &SyntheticConfig) -> Result<SyntheticHistory> {
    config.validate()?;
    let truth = SyntheticTruth {
        true_psm: config.true_psm,
        overdispersion: config.overdispersion,
        countries: config
            .countries
            .iter()
            .map(|c| CountryTruth {
                name: c.name.clone(),
                t_mean: c.t_mean,
                gap_mean: c.gap_mean,
            })
            .collect(),
    };
    let width = (config.n_studies.max(1)).to_string().len().max(4);
    let mut studies = Vec::with_capacity(config.n_studies);
    let mut records = Vec::new();
    for i in 0..config.n_studies {
        let mut rng: SimRng = stream(config.seed, i as u64, "synthetic/study");
        let study_id = format!("SYN{:0width$}", i + 1);
        let [lo, hi] = config.duration_range;
        let duration = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let mut groups = Vec::new();
        let mut offset = 0.0;
        for c in &config.countries {
            let [a, b] = c.n_sites_range;
            let n = rng.random_range(a..=b);
            let (t, gap) = draw_country(config, c, &mut rng);
            let opens: Vec<f64> = (0..n)
                .map(|j| t + f64::from(j) * gap)
                .take_while(|&u| u < duration)
                .collect();
            // Validation guarantees the first site opens before the study ends.
            let exposure: f64 = opens.iter().map(|u| duration - u).sum();
            offset += exposure;
            let mean_open = opens.iter().sum::<f64>() / opens.len() as f64;
            groups.push(SiteGroup::new(c.name.clone(), opens.len() as u32, Some(mean_open))?);
            records.push(ActivationRecord::new(study_id.clone(), c.name.clone(), opens)?);
        }
        let n_subjects = overdispersed_count(config.true_psm * offset, config.overdispersion, &mut rng);
        studies.push(HistoricalStudy::new(study_id, n_subjects, duration, groups, None)?);
    }
    Ok(SyntheticHistory {
        studies,
        records,
        truth,
    })
}

/// Draws the site schedule of a new trial from the generator's own
/// activation mechanism, for checking forecasts against a known truth.
pub fn draw_trial_schedule<R: Rng + ?Sized>(
    config: &SyntheticConfig,
    countries: &[CountrySites],
    rng: &mut R,
) -> Result<SiteSchedule> {
    config.validate()?;
    let mut out = Vec::with_capacity(countries.len());
    for cs in countries {
        let c = config.countries.iter().find(|c| c.name == cs.country).ok_or_else(|| {
            Error::invalid(
                "countries",
                format!("country {} is not in the synthetic config", cs.country),
            )
        })?;
        let (t, gap) = draw_country(config, c, rng);
        out.push((
            cs.country.clone(),
            (0..cs.n_sites).map(|j| t + f64::from(j) * gap).collect(),
        ));
    }
    SiteSchedule::from_countries(out)
}
