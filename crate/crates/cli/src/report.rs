use std::fmt::Write;

use enrollcast::{FittedHistory, ForecastSummary, Scenario};

fn months(v: Option<f64>) -> String {
    v.map(|m| format!("{m:.1}")).unwrap_or_else(|| "not reached".into())
}

pub fn fitted(history: &FittedHistory) -> String {
    let m = history.model();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "accrual: {:.4} subjects per site-month (log rate {:.4} ± {:.4}, dispersion {:.3}, {} studies)",
        m.psm(),
        m.intercept(),
        m.intercept_se(),
        m.dispersion(),
        m.n_studies_fit()
    );
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>7} {:>7}",
        "country", "start-up", "gap", "pairs", "studies"
    );
    for p in history.profiles() {
        let _ = writeln!(
            out,
            "{:<10} {:>9.2} {:>9.3} {:>7} {:>7}",
            p.country(),
            p.t_hat(),
            p.gap_hat(),
            p.pairs().len(),
            p.n_studies()
        );
    }
    out
}

pub fn forecast(scenario: &Scenario, s: &ForecastSummary) -> String {
    let level = scenario.pi_level() * 100.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "target {} subjects at {} sites, {} mode, {} replicates, seed {}",
        scenario.target_enrollment(),
        scenario.total_sites(),
        scenario.mode(),
        scenario.replicates(),
        scenario.seed()
    );
    let _ = writeln!(
        out,
        "last subject first dose: {} months ({level:.0}% PI {} to {})",
        months(s.point_months),
        months(s.pi_low_months),
        months(s.pi_high_months)
    );
    let _ = writeln!(
        out,
        "first subject first dose: {} months ({level:.0}% PI {} to {})",
        months(s.fsfd_point),
        months(s.fsfd_pi_low),
        months(s.fsfd_pi_high)
    );
    let _ = writeln!(
        out,
        "censored at {} months: {:.1}%",
        scenario.horizon_months(),
        s.censored_fraction * 100.0
    );
    let _ = writeln!(out, "\n{:>6} {:>8} {:>8} {:>8}", "month", "low", "median", "high");
    let target = scenario.target_enrollment() as f64;
    for c in &s.curve {
        let m = c.month as u64;
        if m.is_multiple_of(3) || c.q_low >= target {
            let _ = writeln!(out, "{:>6} {:>8.0} {:>8.0} {:>8.0}", m, c.q_low, c.q_median, c.q_high);
        }
        if c.q_low >= target {
            break;
        }
    }
    out
}
