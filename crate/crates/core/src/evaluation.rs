//! Forecast scoring against realized enrollment durations.

use crate::domain::{EvaluationRow, ForecastSummary, SummaryMetrics};
use crate::error::{Error, Result};
use crate::stats::{mean, median};

/// Half-widths (months) of the three fixed accuracy windows.
pub const DEFAULT_WINDOWS: [f64; 3] = [1.0, 2.0, 3.0];

/// Scores one prediction. Window membership is `|predicted - actual| <= k`.
pub fn score_prediction(
    study_id: impl Into<String>,
    actual_months: f64,
    predicted_months: f64,
    pi_low: f64,
    pi_high: f64,
    windows: [f64; 3],
) -> Result<EvaluationRow> {
    let study_id = study_id.into();
    for (name, v) in [
        ("actual_months", actual_months),
        ("predicted_months", predicted_months),
        ("pi_low", pi_low),
        ("pi_high", pi_high),
    ] {
        if !v.is_finite() {
            return Err(Error::Unscorable {
                study_id,
                message: format!("{name} is not a finite number"),
            });
        }
    }
    if pi_low > pi_high {
        return Err(Error::Unscorable {
            study_id,
            message: format!("prediction interval ({pi_low}, {pi_high}) is inverted"),
        });
    }
    let prediction_error = predicted_months - actual_months;
    let within = |k: f64| prediction_error.abs() <= k;
    Ok(EvaluationRow {
        study_id,
        actual_months,
        predicted_months,
        prediction_error,
        pi_low,
        pi_high,
        within_pi: pi_low <= actual_months && actual_months <= pi_high,
        within_1mo: within(windows[0]),
        within_2mo: within(windows[1]),
        within_3mo: within(windows[2]),
    })
}

/// Scores a simulated forecast. Censored forecasts (absent point or bound)
/// are rejected rather than scored.
pub fn evaluate_prediction(
    study_id: impl Into<String>,
    actual_months: f64,
    summary: &ForecastSummary,
    windows: [f64; 3],
) -> Result<EvaluationRow> {
    let study_id = study_id.into();
    let missing = |what: &str| Error::Unscorable {
        study_id: study_id.clone(),
        message: format!("forecast has no {what} (censored at the horizon)"),
    };
    let predicted = summary.point_months.ok_or_else(|| missing("point prediction"))?;
    let low = summary.pi_low_months.ok_or_else(|| missing("lower interval bound"))?;
    let high = summary.pi_high_months.ok_or_else(|| missing("upper interval bound"))?;
    score_prediction(study_id, actual_months, predicted, low, high, windows)
}

pub fn summarize_rows(rows: &[EvaluationRow]) -> Result<SummaryMetrics> {
    if rows.is_empty() {
        return Err(Error::invalid("rows", "no evaluation rows to summarize"));
    }
    let lengths: Vec<f64> = rows.iter().map(|r| r.pi_high - r.pi_low).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.prediction_error).collect();
    let abs_errors: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let n = rows.len() as f64;
    let coverage = |flag: fn(&EvaluationRow) -> bool| rows.iter().filter(|r| flag(r)).count() as f64 / n;
    Ok(SummaryMetrics {
        pi_length_median: median(&lengths).unwrap(),
        pi_length_mean: mean(&lengths).unwrap(),
        prediction_error_median: median(&errors).unwrap(),
        abs_error_median: median(&abs_errors).unwrap(),
        abs_error_mean: mean(&abs_errors).unwrap(),
        coverage_pi: coverage(|r| r.within_pi),
        coverage_1mo: coverage(|r| r.within_1mo),
        coverage_2mo: coverage(|r| r.within_2mo),
        coverage_3mo: coverage(|r| r.within_3mo),
    })
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "YES"
    } else {
        "NO"
    }
}

/// Fixed-width text table of rows followed by the summary line.
pub fn render_table(rows: &[EvaluationRow], summary: &SummaryMetrics) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>8} {:>9} {:>7} {:>15} {:>6} {:>5} {:>5} {:>5}\n",
        "study", "actual", "predicted", "error", "PI", "in PI", "±1", "±2", "±3"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>8.1} {:>9.1} {:>7.1} {:>15} {:>6} {:>5} {:>5} {:>5}\n",
            r.study_id,
            r.actual_months,
            r.predicted_months,
            r.prediction_error,
            format!("({:.1},{:.1})", r.pi_low, r.pi_high),
            yes_no(r.within_pi),
            yes_no(r.within_1mo),
            yes_no(r.within_2mo),
            yes_no(r.within_3mo),
        ));
    }
    let pct = |x: f64| format!("{:.0}%", x * 100.0);
    out.push_str(&format!(
        "\nPI length median {:.2} mo (mean {:.2}); prediction error median {:.2} mo; |error| median {:.2} (mean {:.2})\n",
        summary.pi_length_median,
        summary.pi_length_mean,
        summary.prediction_error_median,
        summary.abs_error_median,
        summary.abs_error_mean
    ));
    out.push_str(&format!(
        "coverage: PI {}  ±1 {}  ±2 {}  ±3 {}\n",
        pct(summary.coverage_pi),
        pct(summary.coverage_1mo),
        pct(summary.coverage_2mo),
        pct(summary.coverage_3mo)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn summary(point: Option<f64>, low: Option<f64>, high: Option<f64>) -> ForecastSummary {
        ForecastSummary {
            point_months: point,
            pi_low_months: low,
            pi_high_months: high,
            fsfd_point: None,
            fsfd_pi_low: None,
            fsfd_pi_high: None,
            censored_fraction: 0.0,
            curve: vec![],
        }
    }

    #[test]
    fn large_underprediction() {
        let r = evaluate_prediction("1", 26.4, &summary(Some(19.3), Some(15.5), Some(24.0)), DEFAULT_WINDOWS).unwrap();
        assert_abs_diff_eq!(r.prediction_error, -7.1, epsilon = 1e-9);
        assert!(!r.within_pi && !r.within_1mo && !r.within_2mo && !r.within_3mo);
    }

    #[test]
    fn modest_overprediction() {
        let r = evaluate_prediction("2", 17.5, &summary(Some(18.9), Some(15.8), Some(22.4)), DEFAULT_WINDOWS).unwrap();
        assert_abs_diff_eq!(r.prediction_error, 1.4, epsilon = 1e-9);
        assert!(r.within_pi && !r.within_1mo && r.within_2mo && r.within_3mo);
    }

    #[test]
    fn perfect_prediction() {
        let r = score_prediction("p", 12.0, 12.0, 10.0, 14.0, DEFAULT_WINDOWS).unwrap();
        assert_eq!(r.prediction_error, 0.0);
        assert!(r.within_pi && r.within_1mo && r.within_2mo && r.within_3mo);
    }

    #[test]
    fn window_edges_are_inclusive() {
        let r = score_prediction("e", 10.0, 11.0, 11.0, 12.0, DEFAULT_WINDOWS).unwrap();
        assert!(r.within_1mo);
        assert!(!r.within_pi);
        let r = score_prediction("e", 11.0, 11.0, 11.0, 11.0, DEFAULT_WINDOWS).unwrap();
        assert!(r.within_pi);
    }

    #[test]
    fn censored_forecasts_are_not_scored() {
        let err = evaluate_prediction("c", 10.0, &summary(Some(9.0), Some(8.0), None), DEFAULT_WINDOWS).unwrap_err();
        assert!(err.to_string().contains("upper interval bound"));
        assert!(evaluate_prediction("c", 10.0, &summary(None, None, None), DEFAULT_WINDOWS).is_err());
        assert!(score_prediction("c", 10.0, 9.0, 12.0, 8.0, DEFAULT_WINDOWS).is_err());
    }

    #[test]
    fn singleton_summary() {
        let r = score_prediction("s", 10.0, 12.5, 9.0, 15.0, DEFAULT_WINDOWS).unwrap();
        let m = summarize_rows(&[r]).unwrap();
        assert_eq!(m.pi_length_median, 6.0);
        assert_eq!(m.pi_length_mean, 6.0);
        assert_eq!(m.prediction_error_median, 2.5);
        assert_eq!(m.abs_error_median, 2.5);
        assert_eq!(
            (m.coverage_pi, m.coverage_1mo, m.coverage_2mo, m.coverage_3mo),
            (1.0, 0.0, 0.0, 1.0)
        );
        assert!(summarize_rows(&[]).is_err());
    }

    #[test]
    fn even_count_uses_midpoint() {
        let rows: Vec<_> = [(10.0, 11.0), (10.0, 13.0)]
            .iter()
            .map(|&(a, p)| score_prediction("x", a, p, 0.0, 20.0, DEFAULT_WINDOWS).unwrap())
            .collect();
        assert_eq!(summarize_rows(&rows).unwrap().prediction_error_median, 2.0);
    }
}
