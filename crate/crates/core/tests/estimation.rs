mod common;

use enrollcast::data_io::{generate_synthetic_history, synthetic::overdispersed_count, SyntheticCountry};
use enrollcast::seed::stream;
use enrollcast::{
    compute_offset, estimate_profiles, fit_accrual, fit_accrual_with, fit_intercept_irls, sample_psm, AccrualModel,
    FitOptions, HistoricalStudy,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};

use common::{mean_var, two_country_config};

fn override_study(i: usize, x: u64, d: f64) -> HistoricalStudy {
    HistoricalStudy::new(format!("S{i}"), x, 12.0, vec![], Some(d)).unwrap()
}

proptest! {
    #[test]
    fn closed_form_agrees_with_irls(
        data in prop::collection::vec((0u64..500, 0.5f64..2_000.0), 1..12)
            .prop_filter("needs a subject", |v| v.iter().any(|(x, _)| *x > 0))
    ) {
        let studies: Vec<_> = data.iter().enumerate().map(|(i, &(x, d))| override_study(i, x, d)).collect();
        let m = fit_accrual(&studies).unwrap();
        let counts: Vec<f64> = data.iter().map(|(x, _)| *x as f64).collect();
        let offsets: Vec<f64> = data.iter().map(|(_, d)| *d).collect();
        let irls = fit_intercept_irls(&counts, &offsets).unwrap();
        prop_assert!((m.intercept() - irls).abs() < 1e-8);
        prop_assert_eq!(m.psm(), m.intercept().exp());
        prop_assert!(m.dispersion() >= 1.0);
    }

    #[test]
    fn offsets_rescale_only_the_intercept(
        data in prop::collection::vec((1u64..500, 1.0f64..500.0), 2..10),
        c in 0.01f64..100.0,
    ) {
        let a: Vec<_> = data.iter().enumerate().map(|(i, &(x, d))| override_study(i, x, d)).collect();
        let b: Vec<_> = data.iter().enumerate().map(|(i, &(x, d))| override_study(i, x, d * c)).collect();
        let opts = FitOptions { dispersion_floor: 0.0 };
        let (ma, mb) = (fit_accrual_with(&a, opts).unwrap(), fit_accrual_with(&b, opts).unwrap());
        prop_assert!((mb.intercept() - (ma.intercept() - c.ln())).abs() < 1e-9);
        for (sa, sb) in a.iter().zip(&b) {
            let fa = compute_offset(sa).unwrap() * ma.psm();
            let fb = compute_offset(sb).unwrap() * mb.psm();
            prop_assert!((fa - fb).abs() < 1e-8 * fa.max(1.0));
        }
        prop_assert!((ma.dispersion() - mb.dispersion()).abs() < 1e-9 * ma.dispersion().max(1.0));
    }
}

#[test]
fn dispersion_ignores_study_order() {
    let h = generate_synthetic_history(&two_country_config(40, 0.5, 2.0, 3)).unwrap();
    let mut studies = h.studies.clone();
    let a = fit_accrual(&studies).unwrap();
    studies.shuffle(&mut stream(9, 0, "shuffle"));
    let b = fit_accrual(&studies).unwrap();
    assert!((a.dispersion() - b.dispersion()).abs() < 1e-12);
    assert!((a.intercept() - b.intercept()).abs() < 1e-12);
}

#[test]
fn recovers_rate_and_dispersion_from_synthetic_bank() {
    let h = generate_synthetic_history(&two_country_config(200, 0.5, 2.0, 20_240_601)).unwrap();
    let m = fit_accrual(&h.studies).unwrap();
    assert!((0.45..=0.55).contains(&m.psm()), "psm {}", m.psm());
    assert!((1.4..=2.8).contains(&m.dispersion()), "dispersion {}", m.dispersion());
    let profiles = estimate_profiles(&h.records).unwrap();
    for p in &profiles {
        let truth = h.truth.countries.iter().find(|c| c.name == p.country()).unwrap();
        assert!((p.t_hat() - truth.t_mean).abs() < 0.25 * truth.t_mean, "{p:?}");
        assert!((p.gap_hat() - truth.gap_mean).abs() < 0.25 * truth.gap_mean, "{p:?}");
    }
}

fn single_country(n: usize, od: f64, fixed_sites: bool, seed: u64) -> enrollcast::data_io::SyntheticConfig {
    let mut c = two_country_config(n, 0.5, od, seed);
    c.countries = vec![SyntheticCountry {
        name: "US".into(),
        t_mean: 2.0,
        gap_mean: 0.5,
        n_sites_range: if fixed_sites { [20, 20] } else { [10, 30] },
    }];
    c.gap_jitter = 0.0;
    c
}

// Monte Carlo check of the generator's analytic mean E[X] = psm * d.
#[test]
fn plain_poisson_generator_mean() {
    let h = generate_synthetic_history(&single_country(1000, 1.0, false, 5)).unwrap();
    let expected: f64 = h.studies.iter().map(|s| 0.5 * compute_offset(s).unwrap()).sum();
    let observed: f64 = h.studies.iter().map(|s| s.n_subjects() as f64).sum();
    // Under Poisson counts the variance of the total equals its mean.
    let se = expected.sqrt();
    assert!(
        (observed - expected).abs() < 3.0 * se,
        "{observed} vs {expected} (se {se})"
    );
}

#[test]
fn plain_poisson_variance_to_mean_ratio() {
    let mut c = single_country(600, 1.0, true, 8);
    c.t_jitter = 0.0;
    c.duration_range = [15.0, 15.0];
    let h = generate_synthetic_history(&c).unwrap();
    let d0 = compute_offset(&h.studies[0]).unwrap();
    assert!(h.studies.iter().all(|s| compute_offset(s).unwrap() == d0));
    let xs: Vec<f64> = h.studies.iter().map(|s| s.n_subjects() as f64).collect();
    let (m, v) = mean_var(&xs);
    assert!((0.8..=1.2).contains(&(v / m)), "ratio {}", v / m);
}

#[test]
fn gamma_mixture_inflates_variance() {
    let mut rng = stream(77, 0, "od");
    let xs: Vec<f64> = (0..20_000)
        .map(|_| overdispersed_count(50.0, 3.0, &mut rng) as f64)
        .collect();
    let (m, v) = mean_var(&xs);
    assert!((m - 50.0).abs() < 0.2, "{m}");
    assert!((v / m - 3.0).abs() < 0.15, "{}", v / m);
}

// Log draws should be Normal(intercept, se^2): one-sample Kolmogorov-Smirnov
// at the 1% critical value.
#[test]
fn sampled_rates_are_log_normal() {
    let model = AccrualModel::new(-0.7, 0.08, 1.3, 25).unwrap();
    let mut rng = stream(31, 0, "psm");
    let n = 20_000;
    let mut logs: Vec<f64> = (0..n).map(|_| sample_psm(&model, &mut rng).ln()).collect();
    logs.sort_by(f64::total_cmp);
    let normal = Normal::new(-0.7, 0.08).unwrap();
    let d = logs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
    assert!(logs.iter().all(|l| l.exp() > 0.0));
}
