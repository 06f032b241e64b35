//! The fiberwise harmonic oscillator
//!
//! ```text
//! σ₀ = (b̂² + Â_y²) D² − Â_y (x D + D x) + x²,    D = −i d/dx,
//! ```
//!
//! whose spectrum is `(2k + 1) b̂` independently of `Â_y`, with ground state
//! `ρ exp(−δ x²)`, `δ = (b̂ − iÂ_y) / (2(b̂² + Â_y²))`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::banded::{lowest_eigenvalues_bisection, HermitianBand};
use crate::linalg::{CsrMatrix, LinalgError};
use crate::stencil;

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_N_GRID: usize = 2000;

#[derive(Debug, Error)]
pub enum OscillatorError {
    #[error("fiber field must be positive, got b̂ = {0}")]
    NonPositiveField(f64),
    #[error("fiber assembly is not Hermitian (relative residual {0:e})")]
    NonHermitian(f64),
    #[error("window too small: boundary mass {mass:e} of state k = {k}")]
    WindowTooSmall { k: usize, mass: f64 },
    #[error("ground state is not Gaussian: fit residual {residual:e}, Re δ = {re_delta}")]
    NonGaussian { residual: f64, re_delta: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberPoint {
    pub u: f64,
    pub v: f64,
    pub b_hat: f64,
    pub a_hat_y: f64,
}

impl FiberPoint {
    pub fn new(b_hat: f64, a_hat_y: f64) -> Self {
        FiberPoint { u: 0.0, v: 0.0, b_hat, a_hat_y }
    }

    /// Coefficient `b̂² + Â_y²` of `D²`.
    pub fn kinetic(&self) -> f64 {
        self.b_hat * self.b_hat + self.a_hat_y * self.a_hat_y
    }

    /// Oscillator length `√(c / b̂)`.
    pub fn length(&self) -> f64 {
        (self.kinetic() / self.b_hat).sqrt()
    }

    /// Exact Gaussian parameter `δ` of the ground state.
    pub fn delta(&self) -> Complex64 {
        Complex64::new(self.b_hat, -self.a_hat_y) / (2.0 * self.kinetic())
    }

    /// Exact `L²` normalization `ρ = (b̂ / (π c))^{1/4}`.
    pub fn rho(&self) -> f64 {
        (self.b_hat / (std::f64::consts::PI * self.kinetic())).powf(0.25)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSpec {
    /// Half-width of the window `(−W, W)`.
    pub half_width: f64,
    /// Interior points.
    pub n: usize,
    pub order: usize,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.spacing()
    }
}

#[derive(Clone, Debug)]
pub struct OscillatorSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Ground state on the interior grid, `Σ|u|²Δ = 1`, real and positive at
    /// its peak.
    pub ground_vector: Vec<Complex64>,
    pub grid: GridSpec,
}

/// Window that keeps states up to `k_max` negligible at the boundary.
pub fn default_window(fiber: &FiberPoint, k_max: usize) -> f64 {
    fiber.length() * (((2 * k_max + 1) as f64).sqrt() + 6.0)
}

/// Hermitian band discretization of `c D² − α(xD + Dx) + κ x²`.
fn assemble(c: f64, alpha: f64, kappa: f64, grid: &GridSpec) -> Result<HermitianBand, OscillatorError> {
    let n = grid.n;
    let dx = grid.spacing();
    let w2 = stencil::second_derivative(grid.order);
    let w1 = stencil::first_derivative(grid.order);
    let m = w1.len();
    let mut t = Vec::with_capacity(n * (2 * m + 1));
    for i in 0..n {
        let xi = grid.x(i);
        t.push((i, i, Complex64::new(-c * w2[0] / (dx * dx) + kappa * xi * xi, 0.0)));
        for k in 1..=m {
            if i + k >= n {
                break;
            }
            let xj = grid.x(i + k);
            // (xD + Dx)_{ij} = (x_i + x_j) D_{ij}, with D_{i,i+k} = −i w_k / Δ.
            let cross = -alpha * (xi + xj) * Complex64::new(0.0, -w1[k - 1] / dx);
            let v = Complex64::new(-c * w2[k] / (dx * dx), 0.0) + cross;
            t.push((i, i + k, v));
            t.push((i + k, i, v.conj()));
        }
    }
    let csr = CsrMatrix::from_triplets(n, t);
    let herm = csr.hermiticity_residual();
    if herm > 1e-12 {
        return Err(OscillatorError::NonHermitian(herm));
    }
    Ok(csr.to_band())
}

fn check_grid(n: usize, order: usize, half_width: f64) -> Result<(), OscillatorError> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(OscillatorError::InvalidGrid(format!("stencil order {order} must be even and >= 2")));
    }
    if n < order + 2 {
        return Err(OscillatorError::InvalidGrid(format!("{n} points is too few for order {order}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(OscillatorError::InvalidGrid(format!("window half-width {half_width}")));
    }
    Ok(())
}

/// Normalized eigenvector for an isolated eigenvalue `lambda` by inverse
/// iteration on the band matrix.
fn eigenvector(a: &HermitianBand, lambda: f64, gap: f64, dx: f64) -> Result<Vec<Complex64>, OscillatorError> {
    let n = a.dim();
    let f = a.shifted(lambda - 1e-6 * gap).ldl()?;
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + (i % 7) as f64 * 1e-3, 0.0)).collect();
    for _ in 0..4 {
        f.solve_in_place(&mut v);
        let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    }
    let peak = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let phase = v[peak].conj() / v[peak].norm();
    let scale = 1.0 / dx.sqrt();
    v.iter_mut().for_each(|z| *z *= phase * scale);
    Ok(v)
}

/// Mass in the outer tenth of the window on each side.
fn boundary_mass(v: &[Complex64], dx: f64) -> f64 {
    let n = v.len();
    let edge = (n / 10).max(1);
    v[..edge].iter().chain(&v[n - edge..]).map(|z| z.norm_sqr()).sum::<f64>() * dx
}

/// Lowest `k_max + 1` eigenvalues of `σ₀` at `fiber` and its ground state.
/// `x_window` is the half-width of the computational interval; `None`
/// selects [`default_window`].
pub fn fiber_spectrum(
    fiber: &FiberPoint,
    k_max: usize,
    n_grid: usize,
    x_window: Option<f64>,
    order: usize,
) -> Result<OscillatorSpectrum, OscillatorError> {
    if !(fiber.b_hat > 0.0) {
        return Err(OscillatorError::NonPositiveField(fiber.b_hat));
    }
    let half_width = x_window.unwrap_or_else(|| default_window(fiber, k_max));
    check_grid(n_grid, order, half_width)?;
    let grid = GridSpec { half_width, n: n_grid, order };
    let a = assemble(fiber.kinetic(), fiber.a_hat_y, 1.0, &grid)?;
    let scale = (2 * k_max + 1) as f64 * fiber.b_hat;
    let eigenvalues = lowest_eigenvalues_bisection(&a, k_max + 1, 1e-14 * scale)?;
    let dx = grid.spacing();
    let gap = if eigenvalues.len() > 1 { eigenvalues[1] - eigenvalues[0] } else { fiber.b_hat };
    let ground_vector = eigenvector(&a, eigenvalues[0], gap, dx)?;
    let top = *eigenvalues.last().unwrap();
    let top_gap = if k_max > 0 { top - eigenvalues[k_max - 1] } else { gap };
    let top_vector = if k_max > 0 { eigenvector(&a, top, top_gap, dx)? } else { ground_vector.clone() };
    let mass = boundary_mass(&top_vector, dx);
    if mass > 1e-8 {
        return Err(OscillatorError::WindowTooSmall { k: k_max, mass });
    }
    Ok(OscillatorSpectrum { eigenvalues, ground_vector, grid })
}

/// Spectrum of the gauge-transformed real operator `c D² + (b̂²/c) x²` on
/// the same grid.
pub fn gauge_equivalent_spectrum(
    fiber: &FiberPoint,
    k_max: usize,
    grid: &GridSpec,
) -> Result<Vec<f64>, OscillatorError> {
    if !(fiber.b_hat > 0.0) {
        return Err(OscillatorError::NonPositiveField(fiber.b_hat));
    }
    check_grid(grid.n, grid.order, grid.half_width)?;
    let c = fiber.kinetic();
    let a = assemble(c, 0.0, fiber.b_hat * fiber.b_hat / c, grid)?;
    let scale = (2 * k_max + 1) as f64 * fiber.b_hat;
    Ok(lowest_eigenvalues_bisection(&a, k_max + 1, 1e-14 * scale)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussianFit {
    pub rho: f64,
    pub delta: Complex64,
    /// RMS of the complex-log fit residual over the fitted points.
    pub residual: f64,
}

pub const GAUSSIAN_FIT_TOL: f64 = 1e-5;

/// Fits `log u = log ρ − δ x² (+ linear term)` on the inner 60% of the mass
/// of the ground state.
pub fn ground_state_check(spectrum: &OscillatorSpectrum, _fiber: &FiberPoint) -> Result<GaussianFit, OscillatorError> {
    let u = &spectrum.ground_vector;
    let g = &spectrum.grid;
    let dx = g.spacing();
    let total: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
    let mut acc = 0.0;
    let (mut lo, mut hi) = (0, u.len() - 1);
    let mut found_lo = false;
    for (i, z) in u.iter().enumerate() {
        acc += z.norm_sqr() * dx / total;
        if !found_lo && acc >= 0.2 {
            lo = i;
            found_lo = true;
        }
        if acc >= 0.8 {
            hi = i;
            break;
        }
    }
    if hi < lo + 3 {
        return Err(OscillatorError::InvalidGrid("ground state is not resolved".into()));
    }
    // Complex log with the phase unwrapped outward from the peak.
    let peak = (lo..=hi).max_by(|&a, &b| u[a].norm().total_cmp(&u[b].norm())).unwrap();
    let mut phase = vec![0.0; hi - lo + 1];
    phase[peak - lo] = u[peak].arg();
    for i in peak + 1..=hi {
        let step = (u[i] / u[i - 1]).arg();
        phase[i - lo] = phase[i - 1 - lo] + step;
    }
    for i in (lo..peak).rev() {
        let step = (u[i] / u[i + 1]).arg();
        phase[i - lo] = phase[i + 1 - lo] + step;
    }
    let xs: Vec<f64> = (lo..=hi).map(|i| g.x(i)).collect();
    let design = nalgebra::DMatrix::from_fn(xs.len(), 3, |r, c| xs[r].powi(c as i32));
    let re = nalgebra::DVector::from_iterator(xs.len(), (lo..=hi).map(|i| u[i].norm().ln()));
    let im = nalgebra::DVector::from_vec(phase);
    let svd = design.clone().svd(true, true);
    let cre = svd.solve(&re, 1e-14).map_err(|e| OscillatorError::InvalidGrid(e.to_string()))?;
    let cim = svd.solve(&im, 1e-14).map_err(|e| OscillatorError::InvalidGrid(e.to_string()))?;
    let rre = &design * &cre - &re;
    let rim = &design * &cim - &im;
    let residual = ((rre.norm_squared() + rim.norm_squared()) / xs.len() as f64).sqrt();
    let delta = -Complex64::new(cre[2], cim[2]);
    let fit = GaussianFit { rho: cre[0].exp(), delta, residual };
    if residual > GAUSSIAN_FIT_TOL || delta.re <= 0.0 {
        return Err(OscillatorError::NonGaussian { residual, re_delta: delta.re });
    }
    Ok(fit)
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberReport {
    pub fiber: FiberPoint,
    pub eigenvalues: Vec<f64>,
    /// `max_k |μ_k − (2k+1)b̂| / b̂`.
    pub max_relative_error: f64,
    /// `max_k |μ_k − μ_k^gauge|`.
    pub gauge_difference: f64,
    pub fit: GaussianFit,
    pub delta_error: f64,
    pub rho_error: f64,
}

pub fn check_fiber(fiber: &FiberPoint, k_max: usize, n_grid: usize, order: usize) -> Result<FiberReport, OscillatorError> {
    let spec = fiber_spectrum(fiber, k_max, n_grid, None, order)?;
    let gauge = gauge_equivalent_spectrum(fiber, k_max, &spec.grid)?;
    let max_relative_error = spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, mu)| (mu - (2 * k + 1) as f64 * fiber.b_hat).abs() / fiber.b_hat)
        .fold(0.0, f64::max);
    let gauge_difference = spec.eigenvalues.iter().zip(&gauge).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let fit = ground_state_check(&spec, fiber)?;
    Ok(FiberReport {
        fiber: *fiber,
        eigenvalues: spec.eigenvalues,
        max_relative_error,
        gauge_difference,
        delta_error: (fit.delta - fiber.delta()).norm() / fiber.delta().norm(),
        rho_error: (fit.rho - fiber.rho()).abs() / fiber.rho(),
        fit,
    })
}

/// `count` fibers with `b̂ ∈ [0.5, 3]`, `Â_y ∈ [−2, 2]` drawn from a seeded
/// generator, checked in parallel.
pub fn random_fiber_suite(
    count: usize,
    seed: u64,
    k_max: usize,
    n_grid: usize,
    order: usize,
) -> Result<Vec<FiberReport>, OscillatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fibers: Vec<FiberPoint> = (0..count)
        .map(|_| FiberPoint::new(rng.gen_range(0.5..=3.0), rng.gen_range(-2.0..=2.0)))
        .collect();
    fibers.par_iter().map(|f| check_fiber(f, k_max, n_grid, order)).collect()
}
