//! Subject accrual rate estimation.
//!
//! Historical studies only report totals, so each study contributes one count
//! `X_s` against an exposure offset `d_s` in site-months. The model is an
//! intercept-only log-link count regression, `log E[X_s] = log d_s + mu`,
//! with quasi-Poisson variance `var(X_s) = phi * E[X_s]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{AccrualModel, HistoricalStudy};
use crate::error::{Error, Result};

/// Largest tolerated gap between the closed-form and IRLS intercepts.
pub const IRLS_AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Lower clamp for the estimated dispersion; also used when only one
    /// study is available.
    pub dispersion_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { dispersion_floor: 1.0 }
    }
}

/// Site-month exposure of a historical study.
///
/// Groups with a known opening month contribute `n_sites * (duration - open)`;
/// groups without one are assumed open for the whole duration.
pub fn compute_offset(study: &HistoricalStudy) -> Result<f64> {
    if let Some(offset) = study.offset_override() {
        return Ok(offset);
    }
    let w = study.duration_months();
    let mut total = 0.0;
    for group in study.site_groups() {
        let open = group.group_open_month().unwrap_or(0.0);
        if open >= w {
            return Err(Error::invalid(
                "group_open_month",
                format!(
                    "study {}, country {}: opening month {open} leaves no exposure before month {w}",
                    study.study_id(),
                    group.country()
                ),
            ));
        }
        total += f64::from(group.n_sites()) * (w - open);
    }
    Ok(total)
}

fn counts_and_offsets(studies: &[HistoricalStudy]) -> Result<(Vec<f64>, Vec<f64>)> {
    if studies.is_empty() {
        return Err(Error::Estimation("at least one historical study is required".into()));
    }
    let mut counts = Vec::with_capacity(studies.len());
    let mut offsets = Vec::with_capacity(studies.len());
    for s in studies {
        let d = compute_offset(s)?;
        if d.is_nan() || d <= 0.0 {
            return Err(Error::Estimation(format!(
                "study {} has non-positive exposure offset {d}",
                s.study_id()
            )));
        }
        counts.push(s.n_subjects() as f64);
        offsets.push(d);
    }
    if counts.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Estimation(
            "historical studies enrolled zero subjects in total; the accrual rate is not identifiable".into(),
        ));
    }
    Ok((counts, offsets))
}

/// Intercept by iteratively reweighted least squares on the working response.
///
/// Independent of the closed form in [`fit_accrual`]; exposed so the two
/// can be cross-checked.
pub fn fit_intercept_irls(counts: &[f64], offsets: &[f64]) -> Result<f64> {
    if counts.len() != offsets.len() || counts.is_empty() {
        return Err(Error::Estimation(
            "counts and offsets must be non-empty and of equal length".into(),
        ));
    }
    // Start from mu = log(X + 0.1) - log d averaged with unit weights.
    let mut mu = counts
        .iter()
        .zip(offsets)
        .map(|(x, d)| (x + 0.1).ln() - d.ln())
        .sum::<f64>()
        / counts.len() as f64;
    for _ in 0..200 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&x, &d) in counts.iter().zip(offsets) {
            let lambda = d * mu.exp();
            // Working response on the intercept scale: eta - offset + (x - lambda) / lambda.
            let z = mu + (x - lambda) / lambda;
            num += lambda * z;
            den += lambda;
        }
        let next = num / den;
        if !next.is_finite() {
            return Err(Error::Estimation("IRLS diverged".into()));
        }
        let step = (next - mu).abs();
        mu = next;
        if step < 1e-13 * (1.0 + mu.abs()) {
            return Ok(mu);
        }
    }
    Err(Error::Estimation("IRLS did not converge in 200 iterations".into()))
}

pub fn fit_accrual(studies: &[HistoricalStudy]) -> Result<AccrualModel> {
    fit_accrual_with(studies, FitOptions::default())
}

pub fn fit_accrual_with(studies: &[HistoricalStudy], options: FitOptions) -> Result<AccrualModel> {
    if !(options.dispersion_floor >= 0.0 && options.dispersion_floor.is_finite()) {
        return Err(Error::invalid("dispersion_floor", "must be a non-negative number"));
    }
    let (counts, offsets) = counts_and_offsets(studies)?;
    let total_count: f64 = counts.iter().sum();
    let total_offset: f64 = offsets.iter().sum();
    let intercept = (total_count / total_offset).ln();

    let irls = fit_intercept_irls(&counts, &offsets)?;
    if (irls - intercept).abs() >= IRLS_AGREEMENT_TOL {
        return Err(Error::Estimation(format!(
            "closed-form intercept {intercept} disagrees with IRLS {irls}"
        )));
    }

    let rate = intercept.exp();
    let n = counts.len();
    let pearson: f64 = counts
        .iter()
        .zip(&offsets)
        .map(|(x, d)| {
            let fitted = d * rate;
            (x - fitted).powi(2) / fitted
        })
        .sum();
    let dispersion = if n > 1 {
        (pearson / (n - 1) as f64).max(options.dispersion_floor)
    } else {
        options.dispersion_floor
    };
    if dispersion <= 0.0 {
        // Only reachable with a zero floor and a perfect fit.
        return Err(Error::Estimation(
            "estimated dispersion is zero; raise the dispersion floor".into(),
        ));
    }
    // Sum of fitted counts equals the observed total at the MLE.
    let fitted_total: f64 = offsets.iter().map(|d| d * rate).sum();
    let intercept_se = (dispersion / fitted_total).sqrt();
    AccrualModel::new(intercept, intercept_se, dispersion, n)
}

/// Draws a patients-per-site-month rate as `exp(z)` with
/// `z ~ Normal(intercept, intercept_se^2)`.
pub fn sample_psm<R: Rng + ?Sized>(model: &AccrualModel, rng: &mut R) -> f64 {
    if model.intercept_se() == 0.0 {
        return model.psm();
    }
    let normal = Normal::new(model.intercept(), model.intercept_se())
        .expect("model invariants guarantee a finite non-negative standard deviation");
    normal.sample(rng).exp()
}
