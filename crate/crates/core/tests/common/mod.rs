#![allow(dead_code)]

use enrollcast::data_io::{SyntheticConfig, SyntheticCountry};
use enrollcast::{ReplicateOutcome, SiteSchedule};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Reference sampler: split `[0, horizon]` at the opening times, draw a
/// Poisson count per homogeneous piece and scatter that many uniform
/// arrivals within it.
pub fn piecewise_oracle<R: Rng>(
    schedule: &SiteSchedule,
    psm: f64,
    target: u64,
    horizon: f64,
    rng: &mut R,
) -> ReplicateOutcome {
    let mut cuts: Vec<f64> = schedule.open_months().filter(|&u| u < horizon).collect();
    cuts.push(0.0);
    cuts.push(horizon);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut arrivals = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let open = schedule.open_months().filter(|&u| u <= a).count() as f64;
        let mean = psm * open * (b - a);
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean).unwrap().sample(rng) as usize;
        for _ in 0..n {
            arrivals.push(a + (b - a) * rng.random::<f64>());
        }
    }
    arrivals.sort_by(f64::total_cmp);
    let months = horizon.ceil() as usize;
    let monthly_cumulative = (1..=months)
        .map(|m| arrivals.iter().filter(|&&t| t <= (m as f64).min(horizon)).count() as u64)
        .collect();
    ReplicateOutcome {
        fsfd_month: arrivals.first().copied(),
        lsfd_month: arrivals.get(target as usize - 1).copied(),
        total_enrolled: arrivals.len() as u64,
        monthly_cumulative,
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn two_country_config(n_studies: usize, psm: f64, overdispersion: f64, seed: u64) -> SyntheticConfig {
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
