//! Domain value types shared by estimation, simulation and evaluation.
//!
//! Types with invariants keep their fields private and validate in their
//! constructors; output records produced by this crate expose plain fields.
//! All times are months from a per-study time zero (protocol approval).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteGroup {
    country: String,
    n_sites: u32,
    group_open_month: Option<f64>,
}

impl SiteGroup {
    pub fn new(country: impl Into<String>, n_sites: u32, group_open_month: Option<f64>) -> Result<Self> {
        let country = country.into();
        if country.trim().is_empty() {
            return Err(Error::invalid("country", "must not be empty"));
        }
        if n_sites == 0 {
            return Err(Error::invalid(
                "n_sites",
                format!("country {country}: must be at least 1"),
            ));
        }
        if let Some(open) = group_open_month {
            if finite("group_open_month", open)? < 0.0 {
                return Err(Error::invalid(
                    "group_open_month",
                    format!("country {country}: must be non-negative, got {open}"),
                ));
            }
        }
        Ok(Self {
            country,
            n_sites,
            group_open_month,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn n_sites(&self) -> u32 {
        self.n_sites
    }

    pub fn group_open_month(&self) -> Option<f64> {
        self.group_open_month
    }
}

/// One study-level historical record: subject count, whole enrollment
/// duration and the site groups that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoricalStudy {
    study_id: String,
    n_subjects: u64,
    duration_months: f64,
    site_groups: Vec<SiteGroup>,
    offset_override: Option<f64>,
}

impl HistoricalStudy {
    pub fn new(
        study_id: impl Into<String>,
        n_subjects: u64,
        duration_months: f64,
        site_groups: Vec<SiteGroup>,
        offset_override: Option<f64>,
    ) -> Result<Self> {
        let study_id = study_id.into();
        if finite("duration_months", duration_months)? <= 0.0 {
            return Err(Error::invalid(
                "duration_months",
                format!("study {study_id}: must be positive, got {duration_months}"),
            ));
        }
        if let Some(offset) = offset_override {
            if finite("offset_override", offset)? < 0.0 {
                return Err(Error::invalid(
                    "offset_override",
                    format!("study {study_id}: must be non-negative, got {offset}"),
                ));
            }
        } else if site_groups.is_empty() {
            return Err(Error::invalid(
                "site_groups",
                format!("study {study_id}: needs site groups or an offset override"),
            ));
        }
        for group in &site_groups {
            if let Some(open) = group.group_open_month {
                if open >= duration_months {
                    return Err(Error::invalid(
                        "group_open_month",
                        format!(
                            "study {study_id}, country {}: opening month {open} is not before the enrollment duration {duration_months}",
                            group.country
                        ),
                    ));
                }
            }
        }
        Ok(Self {
            study_id,
            n_subjects,
            duration_months,
            site_groups,
            offset_override,
        })
    }

    pub fn study_id(&self) -> &str {
        &self.study_id
    }

    pub fn n_subjects(&self) -> u64 {
        self.n_subjects
    }

    pub fn duration_months(&self) -> f64 {
        self.duration_months
    }

    pub fn site_groups(&self) -> &[SiteGroup] {
        &self.site_groups
    }

    pub fn offset_override(&self) -> Option<f64> {
        self.offset_override
    }
}

/// Per-site activation months of one country within one historical study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationRecord {
    study_id: String,
    country: String,
    activation_months: Vec<f64>,
}

impl ActivationRecord {
    /// Sorts `activation_months` ascending.
    pub fn new(
        study_id: impl Into<String>,
        country: impl Into<String>,
        mut activation_months: Vec<f64>,
    ) -> Result<Self> {
        let study_id = study_id.into();
        let country = country.into();
        if activation_months.is_empty() {
            return Err(Error::invalid(
                "activation_months",
                format!("study {study_id}, country {country}: no activations"),
            ));
        }
        for &month in &activation_months {
            if finite("activation_month", month)? < 0.0 {
                return Err(Error::invalid(
                    "activation_month",
                    format!("study {study_id}, country {country}: negative month {month}"),
                ));
            }
        }
        activation_months.sort_by(f64::total_cmp);
        Ok(Self {
            study_id,
            country,
            activation_months,
        })
    }

    pub fn study_id(&self) -> &str {
        &self.study_id
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn activation_months(&self) -> &[f64] {
        &self.activation_months
    }
}

/// Historical start-up time and opening spacing observed in one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupPair {
    /// Months from time zero to the first site activation.
    pub t: f64,
    /// Months between consecutive site openings.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr")]
pub struct CountryActivationProfile {
    country: String,
    t_hat: f64,
    gap_hat: f64,
    pairs: Vec<StartupPair>,
    n_studies: usize,
}

#[derive(Deserialize)]
struct ProfileRepr {
    country: String,
    t_hat: f64,
    gap_hat: f64,
    pairs: Vec<StartupPair>,
    n_studies: usize,
}

impl TryFrom<ProfileRepr> for CountryActivationProfile {
    type Error = Error;

    fn try_from(r: ProfileRepr) -> Result<Self> {
        Self::new(r.country, r.t_hat, r.gap_hat, r.pairs, r.n_studies)
    }
}

impl CountryActivationProfile {
    /// `pairs` holds only studies with a defined gap, so it may be shorter
    /// than `n_studies` (and empty when the gap came from an override).
    pub fn new(
        country: impl Into<String>,
        t_hat: f64,
        gap_hat: f64,
        pairs: Vec<StartupPair>,
        n_studies: usize,
    ) -> Result<Self> {
        let country = country.into();
        if finite("t_hat", t_hat)? < 0.0 {
            return Err(Error::invalid(
                "t_hat",
                format!("country {country}: must be non-negative"),
            ));
        }
        if finite("gap_hat", gap_hat)? <= 0.0 {
            return Err(Error::invalid(
                "gap_hat",
                format!("country {country}: must be positive"),
            ));
        }
        if n_studies == 0 {
            return Err(Error::invalid(
                "n_studies",
                format!("country {country}: must be at least 1"),
            ));
        }
        if pairs.len() > n_studies {
            return Err(Error::invalid(
                "pairs",
                format!("country {country}: {} pairs from {n_studies} studies", pairs.len()),
            ));
        }
        for p in &pairs {
            if !(p.t.is_finite() && p.t >= 0.0 && p.gap.is_finite() && p.gap > 0.0) {
                return Err(Error::invalid(
                    "pairs",
                    format!("country {country}: invalid pair (t = {}, gap = {})", p.t, p.gap),
                ));
            }
        }
        Ok(Self {
            country,
            t_hat,
            gap_hat,
            pairs,
            n_studies,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn t_hat(&self) -> f64 {
        self.t_hat
    }

    pub fn gap_hat(&self) -> f64 {
        self.gap_hat
    }

    pub fn pairs(&self) -> &[StartupPair] {
        &self.pairs
    }

    pub fn n_studies(&self) -> usize {
        self.n_studies
    }
}

/// Fitted intercept-only quasi-Poisson accrual model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AccrualRepr")]
pub struct AccrualModel {
    intercept: f64,
    intercept_se: f64,
    dispersion: f64,
    psm: f64,
    n_studies_fit: usize,
}

#[derive(Deserialize)]
struct AccrualRepr {
    intercept: f64,
    intercept_se: f64,
    dispersion: f64,
    #[allow(dead_code)]
    psm: f64,
    n_studies_fit: usize,
}

impl TryFrom<AccrualRepr> for AccrualModel {
    type Error = Error;

    fn try_from(r: AccrualRepr) -> Result<Self> {
        Self::new(r.intercept, r.intercept_se, r.dispersion, r.n_studies_fit)
    }
}

impl AccrualModel {
    /// `psm` is derived as `exp(intercept)`.
    pub fn new(intercept: f64, intercept_se: f64, dispersion: f64, n_studies_fit: usize) -> Result<Self> {
        finite("intercept", intercept)?;
        if finite("intercept_se", intercept_se)? < 0.0 {
            return Err(Error::invalid("intercept_se", "must be non-negative"));
        }
        if finite("dispersion", dispersion)? <= 0.0 {
            return Err(Error::invalid("dispersion", "must be positive"));
        }
        let psm = intercept.exp();
        if !(psm.is_finite() && psm > 0.0) {
            return Err(Error::invalid(
                "intercept",
                format!("exp({intercept}) is not a positive finite rate"),
            ));
        }
        Ok(Self {
            intercept,
            intercept_se,
            dispersion,
            psm,
            n_studies_fit,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn intercept_se(&self) -> f64 {
        self.intercept_se
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    /// Patients per site per month.
    pub fn psm(&self) -> f64 {
        self.psm
    }

    pub fn n_studies_fit(&self) -> usize {
        self.n_studies_fit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationMode {
    /// Deterministic linear projection from the medians.
    Fixed,
    /// Paired bootstrap of historical (start-up, gap) per country and replicate.
    Perturbed,
    /// Exponential inter-opening gaps after the country start-up.
    Poisson,
}

impl fmt::Display for ActivationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationMode::Fixed => "fixed",
            ActivationMode::Perturbed => "perturbed",
            ActivationMode::Poisson => "poisson",
        })
    }
}

impl std::str::FromStr for ActivationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ActivationMode::Fixed),
            "perturbed" => Ok(ActivationMode::Perturbed),
            "poisson" => Ok(ActivationMode::Poisson),
            other => Err(Error::invalid(
                "mode",
                format!("unknown mode `{other}` (expected fixed, perturbed or poisson)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountrySites {
    pub country: String,
    pub n_sites: u32,
}

pub const DEFAULT_PI_LEVEL: f64 = 0.95;
pub const DEFAULT_HORIZON_MONTHS: f64 = 120.0;

/// Unvalidated scenario as it arrives from JSON. Every field is optional so
/// that validation can name the offending field instead of failing inside
/// the parser.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDraft {
    pub countries: Option<Vec<CountrySitesDraft>>,
    pub target_enrollment: Option<i64>,
    pub replicates: Option<i64>,
    pub pi_level: Option<f64>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub horizon_months: Option<f64>,
    pub psm_override: Option<f64>,
    pub poisson_bootstrap_start: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountrySitesDraft {
    pub country: String,
    pub n_sites: i64,
}

/// The planning question: which countries open how many sites, how many
/// subjects to enroll, and how to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDraft")]
pub struct Scenario {
    countries: Vec<CountrySites>,
    target_enrollment: u64,
    replicates: usize,
    pi_level: f64,
    mode: ActivationMode,
    seed: u64,
    horizon_months: f64,
    psm_override: Option<f64>,
    poisson_bootstrap_start: bool,
}

impl TryFrom<ScenarioDraft> for Scenario {
    type Error = Error;

    fn try_from(d: ScenarioDraft) -> Result<Self> {
        let countries = d
            .countries
            .ok_or_else(|| Error::invalid("countries", "missing"))?
            .into_iter()
            .map(|c| {
                let n_sites = u32::try_from(c.n_sites).ok().filter(|&n| n >= 1).ok_or_else(|| {
                    Error::invalid(
                        "n_sites",
                        format!("country {}: must be a positive integer, got {}", c.country, c.n_sites),
                    )
                })?;
                Ok(CountrySites {
                    country: c.country,
                    n_sites,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let target_enrollment = d
            .target_enrollment
            .ok_or_else(|| Error::invalid("target_enrollment", "missing"))?;
        let target_enrollment = u64::try_from(target_enrollment)
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::invalid(
                    "target_enrollment",
                    format!("must be a positive integer, got {target_enrollment}"),
                )
            })?;
        let replicates = d.replicates.ok_or_else(|| Error::invalid("replicates", "missing"))?;
        let replicates = usize::try_from(replicates)
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::invalid("replicates", format!("must be a positive integer, got {replicates}")))?;
        let mode = d.mode.ok_or_else(|| Error::invalid("mode", "missing"))?.parse()?;
        let seed = d
            .seed
            .ok_or_else(|| Error::invalid("seed", "missing; every forecast needs an explicit seed"))?;
        Scenario::new(
            countries,
            target_enrollment,
            replicates,
            d.pi_level.unwrap_or(DEFAULT_PI_LEVEL),
            mode,
            seed,
            d.horizon_months.unwrap_or(DEFAULT_HORIZON_MONTHS),
            d.psm_override,
            d.poisson_bootstrap_start.unwrap_or(false),
        )
    }
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        countries: Vec<CountrySites>,
        target_enrollment: u64,
        replicates: usize,
        pi_level: f64,
        mode: ActivationMode,
        seed: u64,
        horizon_months: f64,
        psm_override: Option<f64>,
        poisson_bootstrap_start: bool,
    ) -> Result<Self> {
        if countries.is_empty() {
            return Err(Error::invalid("countries", "at least one country is required"));
        }
        let mut seen = HashSet::new();
        for c in &countries {
            if c.country.trim().is_empty() {
                return Err(Error::invalid("countries", "country name must not be empty"));
            }
            if !seen.insert(c.country.as_str()) {
                return Err(Error::invalid(
                    "countries",
                    format!("country {} listed twice", c.country),
                ));
            }
            if c.n_sites == 0 {
                return Err(Error::invalid(
                    "n_sites",
                    format!("country {}: must be at least 1", c.country),
                ));
            }
        }
        if target_enrollment == 0 {
            return Err(Error::invalid("target_enrollment", "must be at least 1"));
        }
        if replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if !(pi_level > 0.0 && pi_level < 1.0) {
            return Err(Error::invalid(
                "pi_level",
                format!("must lie strictly between 0 and 1, got {pi_level}"),
            ));
        }
        if !(horizon_months.is_finite() && horizon_months > 0.0) {
            return Err(Error::invalid(
                "horizon_months",
                format!("must be positive, got {horizon_months}"),
            ));
        }
        if let Some(psm) = psm_override {
            if !(psm.is_finite() && psm > 0.0) {
                return Err(Error::invalid("psm_override", format!("must be positive, got {psm}")));
            }
        }
        Ok(Self {
            countries,
            target_enrollment,
            replicates,
            pi_level,
            mode,
            seed,
            horizon_months,
            psm_override,
            poisson_bootstrap_start,
        })
    }

    pub fn countries(&self) -> &[CountrySites] {
        &self.countries
    }

    pub fn target_enrollment(&self) -> u64 {
        self.target_enrollment
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn pi_level(&self) -> f64 {
        self.pi_level
    }

    pub fn mode(&self) -> ActivationMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon_months(&self) -> f64 {
        self.horizon_months
    }

    pub fn psm_override(&self) -> Option<f64> {
        self.psm_override
    }

    pub fn poisson_bootstrap_start(&self) -> bool {
        self.poisson_bootstrap_start
    }

    pub fn total_sites(&self) -> u64 {
        self.countries.iter().map(|c| u64::from(c.n_sites)).sum()
    }

    /// Copy of this scenario with a different site count for one country.
    pub fn with_sites(&self, country: &str, n_sites: u32) -> Result<Self> {
        let mut next = self.clone();
        let entry = next
            .countries
            .iter_mut()
            .find(|c| c.country == country)
            .ok_or_else(|| Error::invalid("countries", format!("country {country} is not in the scenario")))?;
        entry.n_sites = n_sites;
        Scenario::new(
            next.countries,
            next.target_enrollment,
            next.replicates,
            next.pi_level,
            next.mode,
            next.seed,
            next.horizon_months,
            next.psm_override,
            next.poisson_bootstrap_start,
        )
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_mode(&self, mode: ActivationMode) -> Self {
        Self { mode, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub country: String,
    /// 1-based index within the country.
    pub site_index: u32,
    pub open_month: f64,
}

/// Realized site-opening times for one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteSchedule {
    entries: Vec<ScheduleEntry>,
}

impl SiteSchedule {
    /// Builds a schedule from per-country opening months, indexed in order.
    pub fn from_countries<I, S>(countries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (country, opens) in countries {
            let country = country.into();
            if !seen.insert(country.clone()) {
                return Err(Error::invalid("schedule", format!("country {country} appears twice")));
            }
            let mut prev = f64::NEG_INFINITY;
            for (j, &open) in opens.iter().enumerate() {
                if !(open.is_finite() && open >= 0.0) {
                    return Err(Error::invalid(
                        "open_month",
                        format!("country {country}: invalid month {open}"),
                    ));
                }
                if open < prev {
                    return Err(Error::invalid(
                        "open_month",
                        format!("country {country}: opening months must be non-decreasing in site index"),
                    ));
                }
                prev = open;
                entries.push(ScheduleEntry {
                    country: country.clone(),
                    site_index: j as u32 + 1,
                    open_month: open,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn open_months(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.open_month)
    }

    /// Site counts per country, for checking against a scenario.
    pub fn counts(&self) -> BTreeMap<&str, u32> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.country.as_str()).or_insert(0) += 1;
        }
        out
    }
}

/// Outcome of one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// First arrival, absent if nobody enrolled by the horizon.
    pub fsfd_month: Option<f64>,
    /// Arrival of the target-th subject, absent if censored at the horizon.
    pub lsfd_month: Option<f64>,
    pub total_enrolled: u64,
    /// Cumulative enrollment at the end of months 1, 2, ..., ceil(horizon);
    /// the last entry is clipped to the horizon.
    pub monthly_cumulative: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub month: f64,
    pub q_low: f64,
    pub q_median: f64,
    pub q_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub point_months: Option<f64>,
    pub pi_low_months: Option<f64>,
    /// Absent when the upper quantile falls among censored replicates.
    pub pi_high_months: Option<f64>,
    pub fsfd_point: Option<f64>,
    pub fsfd_pi_low: Option<f64>,
    pub fsfd_pi_high: Option<f64>,
    pub censored_fraction: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub study_id: String,
    pub actual_months: f64,
    pub predicted_months: f64,
    /// predicted - actual
    pub prediction_error: f64,
    pub pi_low: f64,
    pub pi_high: f64,
    pub within_pi: bool,
    pub within_1mo: bool,
    pub within_2mo: bool,
    pub within_3mo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub pi_length_median: f64,
    pub pi_length_mean: f64,
    pub prediction_error_median: f64,
    pub abs_error_median: f64,
    pub abs_error_mean: f64,
    pub coverage_pi: f64,
    pub coverage_1mo: f64,
    pub coverage_2mo: f64,
    pub coverage_3mo: f64,
}
