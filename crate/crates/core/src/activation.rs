//! Country start-up and site-opening pace.
//!
//! Each historical (study, country) record yields a start-up time `t` (first
//! activation) and an opening spacing `gap = (last - first) / (n - 1)` in
//! months per site. Profiles keep the medians for linear projection and the
//! raw pairs for the paired bootstrap.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::domain::{ActivationMode, ActivationRecord, CountryActivationProfile, StartupPair};
use crate::error::{Error, Result};
use crate::stats::median;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileOptions {
    /// Spacing in months per site to use for a country instead of the
    /// historical median. Required for countries whose history never opened
    /// more than one site per study.
    pub gap_overrides: BTreeMap<String, f64>,
}

/// `(t, gap)` of one record; gap is `None` for single-site records.
pub fn startup_and_gap(months: &[f64]) -> Option<(f64, Option<f64>)> {
    let first = *months.first()?;
    let last = *months.last()?;
    let gap = (months.len() >= 2).then(|| (last - first) / (months.len() - 1) as f64);
    Some((first, gap))
}

pub fn estimate_profiles(records: &[ActivationRecord]) -> Result<Vec<CountryActivationProfile>> {
    estimate_profiles_with(records, &ProfileOptions::default())
}

pub fn estimate_profiles_with(
    records: &[ActivationRecord],
    options: &ProfileOptions,
) -> Result<Vec<CountryActivationProfile>> {
    if records.is_empty() {
        return Err(Error::invalid("activations", "no activation records to estimate from"));
    }
    let mut by_country: BTreeMap<&str, Vec<(f64, Option<f64>)>> = BTreeMap::new();
    for r in records {
        // Records are validated non-empty and sorted at construction.
        let observed = startup_and_gap(r.activation_months()).expect("non-empty record");
        by_country.entry(r.country()).or_default().push(observed);
    }

    let mut profiles = Vec::with_capacity(by_country.len());
    for (country, observed) in by_country {
        let starts: Vec<f64> = observed.iter().map(|(t, _)| *t).collect();
        let pairs: Vec<StartupPair> = observed
            .iter()
            .filter_map(|&(t, gap)| gap.map(|gap| StartupPair { t, gap }))
            // Equal activation months give a zero spacing, which cannot drive
            // a projection; such studies only inform the start-up time.
            .filter(|p| p.gap > 0.0)
            .collect();
        let t_hat = median(&starts).expect("at least one record per country");
        let gap_hat = match options.gap_overrides.get(country) {
            Some(&gap) => {
                if !(gap.is_finite() && gap > 0.0) {
                    return Err(Error::invalid(
                        "gap_override",
                        format!("country {country}: must be positive"),
                    ));
                }
                gap
            }
            None => {
                let gaps: Vec<f64> = pairs.iter().map(|p| p.gap).collect();
                median(&gaps).ok_or_else(|| Error::NoGapHistory {
                    country: country.to_string(),
                })?
            }
        };
        profiles.push(CountryActivationProfile::new(
            country,
            t_hat,
            gap_hat,
            pairs,
            observed.len(),
        )?);
    }
    Ok(profiles)
}

fn draw_pair<R: Rng + ?Sized>(profile: &CountryActivationProfile, rng: &mut R) -> Result<StartupPair> {
    let pairs = profile.pairs();
    if pairs.is_empty() {
        return Err(Error::invalid(
            "mode",
            format!(
                "country {}: no historical (start-up, gap) pairs to bootstrap",
                profile.country()
            ),
        ));
    }
    Ok(pairs[rng.random_range(0..pairs.len())])
}

/// Opening months of `n_sites` sites in one country, sorted ascending.
///
/// * `Fixed`: `t_hat + (j - 1) * gap_hat`.
/// * `Perturbed`: one historical pair `(t, gap)` drawn with replacement,
///   then the same linear layout.
/// * `Poisson`: first site at the start-up, then exponential spacings with
///   mean `gap`. With `bootstrap_start` the start-up and mean spacing come
///   from one bootstrapped pair instead of the medians.
///
/// Draws are consumed in site order, so with a shared stream the first
/// `n` openings do not depend on how many sites follow.
pub fn project_activation<R: Rng + ?Sized>(
    profile: &CountryActivationProfile,
    n_sites: u32,
    mode: ActivationMode,
    bootstrap_start: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_sites == 0 {
        return Err(Error::invalid(
            "n_sites",
            format!("country {}: must be at least 1", profile.country()),
        ));
    }
    let n = n_sites as usize;
    let linear = |t: f64, gap: f64| (0..n).map(|j| t + j as f64 * gap).collect::<Vec<_>>();
    match mode {
        ActivationMode::Fixed => Ok(linear(profile.t_hat(), profile.gap_hat())),
        ActivationMode::Perturbed => {
            let pair = draw_pair(profile, rng)?;
            Ok(linear(pair.t, pair.gap))
        }
        ActivationMode::Poisson => {
            let (t, gap) = if bootstrap_start {
                let pair = draw_pair(profile, rng)?;
                (pair.t, pair.gap)
            } else {
                (profile.t_hat(), profile.gap_hat())
            };
            let spacing = Exp::new(1.0 / gap).expect("positive gap");
            let mut out = Vec::with_capacity(n);
            let mut u = t;
            out.push(u);
            for _ in 1..n {
                u += spacing.sample(rng);
                out.push(u);
            }
            Ok(out)
        }
    }
}
