//! Closed-form low-lying eigenvalue predictions and expansion fits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::field::WellData;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("h values must be positive and distinct")]
    InvalidAbscissae,
    #[error("h values span {ratio:.3} > 10 (more than a decade)")]
    RangeTooWide { ratio: f64 },
    #[error("design matrix is rank deficient (condition number {condition:e})")]
    Conditioning { condition: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionPrediction {
    pub j: usize,
    pub h: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `h b₀ + h² (2√d/b₀ · j + a²/(2b₀))`, bracketed by `[value − C h^{19/8},
/// value + C h^{5/2}]`.
pub fn predict_lambda(well: &WellData, j: usize, h: f64, cj: f64) -> ExpansionPrediction {
    let value = h * well.b0 + h * h * (well.gap_coefficient() * j as f64 + well.ground_coefficient());
    ExpansionPrediction { j, h, value, lower: value - cj * h.powf(19.0 / 8.0), upper: value + cj * h.powf(2.5) }
}

pub fn predict_gap(well: &WellData, h: f64) -> f64 {
    well.gap_coefficient() * h * h
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// One-sigma errors from the residual variance; zero for exact fits.
    pub standard_errors: Vec<f64>,
    pub residual_norm: f64,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

fn validate(samples: &[(f64, f64)], needed: usize) -> Result<(), FitError> {
    if samples.len() < needed {
        return Err(FitError::InsufficientSamples { needed, got: samples.len() });
    }
    let mut hs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    if hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) || samples.iter().any(|s| !s.1.is_finite()) {
        return Err(FitError::InvalidAbscissae);
    }
    hs.sort_by(f64::total_cmp);
    if hs.windows(2).any(|w| w[0] == w[1]) {
        return Err(FitError::InvalidAbscissae);
    }
    let ratio = hs[hs.len() - 1] / hs[0];
    if ratio > 10.0 + 1e-12 {
        return Err(FitError::RangeTooWide { ratio });
    }
    Ok(())
}

/// Least-squares fit of `λ/h = Σ c_e h^e` over the given exponents.
pub fn fit_powers(samples: &[(f64, f64)], exponents: &[f64]) -> Result<FitResult, FitError> {
    validate(samples, exponents.len() + 1)?;
    let rows = samples.len();
    let cols = exponents.len();
    let x = DMatrix::from_fn(rows, cols, |r, c| samples[r].0.powf(exponents[c]));
    let y = DVector::from_iterator(rows, samples.iter().map(|(h, l)| l / h));
    let sv = x.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(FitError::Conditioning { condition });
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &y;
    let coef = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(FitError::Conditioning { condition })?;
    let resid = &x * &coef - &y;
    let residual_norm = resid.norm();
    let dof = rows.saturating_sub(cols).max(1) as f64;
    let sigma2 = resid.norm_squared() / dof;
    let xtx_inv = (x.transpose() * &x).try_inverse().ok_or(FitError::Conditioning { condition })?;
    let standard_errors = (0..cols).map(|i| (sigma2 * xtx_inv[(i, i)]).max(0.0).sqrt()).collect();
    Ok(FitResult {
        exponents: exponents.to_vec(),
        coefficients: coef.iter().copied().collect(),
        standard_errors,
        residual_norm,
        condition,
    })
}

/// Fit of `λ/h` against `1, h, …, h^order`; the coefficients estimate the
/// `α_{j,ℓ}` of the integer-power expansion.
pub fn fit_expansion(samples: &[(f64, f64)], order: usize) -> Result<FitResult, FitError> {
    validate(samples, order + 2)?;
    let exps: Vec<f64> = (0..=order).map(|l| l as f64).collect();
    fit_powers(samples, &exps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Regression {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Regression { slope, intercept, r2 }
}

/// Slope of `log|y|` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Regression {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_regression(&lx, &ly)
}
