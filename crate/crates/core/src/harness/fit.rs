use serde::Serialize;

use super::{HarnessError, SweepReport};
use crate::asymptotics::{fit_expansion, linear_regression, loglog_slope, FitResult, Regression};

#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub j: usize,
    pub fit: FitResult,
    pub alpha0_expected: f64,
    pub alpha1_expected: f64,
    pub alpha0_relative_error: f64,
    pub alpha1_relative_error: f64,
    /// Log-log slope of `|λ_direct − λ_thm11|` against `h`.
    pub residual_exponent: Regression,
    /// `(h, (λ_direct − λ_bs)/h²)` per sample.
    pub bs_offsets: Vec<(f64, f64)>,
    /// Linear trend of the offsets in `h`; the intercept is the `h → 0` estimate.
    pub bs_offset_trend: Option<Regression>,
    pub max_bracket_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub order: usize,
    pub summaries: Vec<FitSummary>,
}

/// Per-`j` expansion fits and trend estimates over a sweep.
pub fn fit_report(sweep: &SweepReport, order: usize) -> Result<FitReport, HarnessError> {
    let well = sweep
        .well
        .as_ref()
        .ok_or_else(|| HarnessError::Numerical("the sweep has no well data".into()))?;
    let mut summaries = Vec::new();
    for &j in &sweep.config.j {
        let rows: Vec<_> = sweep.rows_for(j).filter(|r| r.lambda_direct.is_finite()).collect();
        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.lambda_direct)).collect();
        let fit = fit_expansion(&samples, order)?;
        let alpha0_expected = well.b0;
        let alpha1_expected = well.gap_coefficient() * j as f64 + well.ground_coefficient();
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let resid: Vec<f64> = rows.iter().map(|r| r.lambda_direct - r.lambda_thm11).collect();
        let bs_offsets: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.lambda_bs.is_finite())
            .map(|r| (r.h, (r.lambda_direct - r.lambda_bs) / (r.h * r.h)))
            .collect();
        let bs_offset_trend = (bs_offsets.len() >= 2).then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = bs_offsets.iter().copied().unzip();
            linear_regression(&x, &y)
        });
        summaries.push(FitSummary {
            j,
            alpha0_relative_error: (fit.coefficients[0] - alpha0_expected).abs() / alpha0_expected,
            alpha1_relative_error: fit
                .coefficients
                .get(1)
                .map_or(f64::NAN, |a| (a - alpha1_expected).abs() / alpha1_expected),
            fit,
            alpha0_expected,
            alpha1_expected,
            residual_exponent: loglog_slope(&hs, &resid),
            bs_offsets,
            bs_offset_trend,
            max_bracket_ratio: rows.iter().map(|r| r.bracket_ratio).fold(0.0, f64::max),
        });
    }
    Ok(FitReport { order, summaries })
}
