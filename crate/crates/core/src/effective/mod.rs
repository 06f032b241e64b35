//! The effective one-dimensional model.
//!
//! With `φ(x, y) = (A(x, y), y)` the field is carried to phase space as
//! `b̂ = b ∘ φ⁻¹`, and `Â_y = ∂_yA ∘ φ⁻¹`. The low-lying spectrum of the
//! 2D operator is then `h` times the spectrum of `b̂(y, hD_y)` to leading
//! order, which can be read off either by Bohr–Sommerfeld or by a direct
//! quantization.

mod action;
mod quantize;

pub use action::{action_profile, bs_levels, sublevel_flux, ActionProfile, BSLevels};
pub use quantize::{quantize_1d, quantize_1d_with, QuantizeOptions};

use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldError, FieldModel, WellData};
use crate::output::{write_csv, write_csv_file, Cell};

#[derive(Debug, Error)]
pub enum EffectiveError {
    #[error("no x with A(x, {v}) = {u} inside the domain")]
    OutOfWindow { u: f64, v: f64 },
    #[error("field is not positive along the search line at v = {v}")]
    NonPositiveField { v: f64 },
    #[error("window does not enclose the sublevel set: boundary minimum {boundary_min} < E_max = {e_max}")]
    WindowTooSmall { boundary_min: f64, e_max: f64 },
    #[error("energy {energy} exceeds the trusted ceiling {e_max}")]
    EnergyAboveWindow { energy: f64, e_max: f64 },
    #[error("action profile is flat near level {level}; refine the grid")]
    Resolution { level: usize },
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("quantized symbol is not Hermitian (residual {0:e})")]
    NonHermitian(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Solves `A(x*, v) = u` and returns `x*`. The bracket grows geometrically
/// from a linearized guess; the iteration is Newton with bisection
/// safeguard, using the exact derivative `b`.
pub fn invert_potential(model: &FieldModel, u: f64, v: f64, tol: f64) -> Result<f64, EffectiveError> {
    let dom = model.domain();
    let f = |x: f64| model.potential(x, v) - u;
    let b_line = model.b(0.0, v);
    let guess = if b_line > 0.0 { (-f(0.0) / b_line).clamp(dom.x_min, dom.x_max) } else { 0.0 };
    let mut step = 0.1;
    let (mut lo, mut hi) = (guess - step, guess + step);
    loop {
        lo = lo.max(dom.x_min);
        hi = hi.min(dom.x_max);
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            break;
        }
        if lo <= dom.x_min && hi >= dom.x_max {
            return Err(EffectiveError::OutOfWindow { u, v });
        }
        step *= 2.0;
        lo = guess - step;
        hi = guess + step;
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = model.b(x, v);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    let fx = f(x);
    if fx.abs() <= tol.max(4.0 * f64::EPSILON * u.abs().max(1.0)) {
        Ok(x)
    } else if model.b(x, v) <= 0.0 {
        Err(EffectiveError::NonPositiveField { v })
    } else {
        Err(EffectiveError::OutOfWindow { u, v })
    }
}

/// `(b̂(u, v), Â_y(u, v))`.
pub fn hat_fields(model: &FieldModel, u: f64, v: f64, tol: f64) -> Result<(f64, f64), EffectiveError> {
    let x = invert_potential(model, u, v, tol)?;
    Ok((model.b(x, v), model.a_y(x, v)))
}

pub const DEFAULT_HAT_TOL: f64 = 1e-13;
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Samples of `b̂` and `Â_y` on a uniform `(u, v)` grid, row-major in `v`.
#[derive(Clone, Debug, Serialize)]
pub struct HatFieldGrid {
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub a_hat_y: Vec<f64>,
    pub e_max: f64,
    pub b0: f64,
    pub gamma0: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl HatFieldGrid {
    /// Grid of an explicit symbol; `Â_y` is set to zero.
    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(
        u_range: (f64, f64),
        v_range: (f64, f64),
        n: (usize, usize),
        b0: f64,
        gamma0: f64,
        f: F,
    ) -> Self {
        let u_grid = linspace(u_range.0, u_range.1, n.0);
        let v_grid = linspace(v_range.0, v_range.1, n.1);
        let b_hat: Vec<f64> = v_grid.iter().flat_map(|&v| u_grid.iter().map(move |&u| (u, v))).map(|(u, v)| f(u, v)).collect();
        let a_hat_y = vec![0.0; b_hat.len()];
        HatFieldGrid { u_grid, v_grid, b_hat, a_hat_y, e_max: b0 + gamma0, b0, gamma0 }
    }

    /// Samples `b̂` for a model already translated and gauge-normalized at
    /// its minimum. The window encloses `{b ≤ b₀ + 1.4γ₀}` with a margin, so
    /// the trusted ceiling `E_max = b₀ + γ₀` is well inside.
    pub fn build(model: &FieldModel, well: &WellData, n: usize) -> Result<Self, EffectiveError> {
        if n < 8 {
            return Err(EffectiveError::InvalidGrid(format!("{n} points per axis")));
        }
        let e_max = well.b0 + well.gamma0;
        let bb = model.sublevel_bbox(well.b0 + 1.4 * well.gamma0)?;
        let dom = model.domain();
        let my = 0.15 * bb.height();
        let (v0, v1) = ((bb.y_min - my).max(dom.y_min), (bb.y_max + my).min(dom.y_max));
        let mx = 0.15 * bb.width();
        let (x0, x1) = ((bb.x_min - mx).max(dom.x_min), (bb.x_max + mx).min(dom.x_max));
        let (mut u0, mut u1) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in linspace(v0, v1, 201) {
            u0 = u0.min(model.potential(x0, v));
            u1 = u1.max(model.potential(x1, v));
        }
        // The image of the box under φ is bounded by the curves u = A(x0, v)
        // and u = A(x1, v); take the largest rectangle still inside the
        // domain image.
        let (mut ua, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
        for v in linspace(v0, v1, 201) {
            ua = ua.max(model.potential(dom.x_min, v));
            ub = ub.min(model.potential(dom.x_max, v));
        }
        u0 = u0.max(ua + 1e-9 * (ub - ua));
        u1 = u1.min(ub - 1e-9 * (ub - ua));
        let u_grid = linspace(u0, u1, n);
        let v_grid = linspace(v0, v1, n);
        let rows: Vec<Vec<(f64, f64)>> = v_grid
            .par_iter()
            .map(|&v| u_grid.iter().map(|&u| hat_fields(model, u, v, DEFAULT_HAT_TOL)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let (b_hat, a_hat_y) = rows.into_iter().flatten().unzip();
        let grid = HatFieldGrid { u_grid, v_grid, b_hat, a_hat_y, e_max, b0: well.b0, gamma0: well.gamma0 };
        let boundary_min = grid.boundary_min();
        if boundary_min < e_max {
            return Err(EffectiveError::WindowTooSmall { boundary_min, e_max });
        }
        Ok(grid)
    }

    pub fn nu(&self) -> usize {
        self.u_grid.len()
    }

    pub fn nv(&self) -> usize {
        self.v_grid.len()
    }

    pub fn du(&self) -> f64 {
        self.u_grid[1] - self.u_grid[0]
    }

    pub fn dv(&self) -> f64 {
        self.v_grid[1] - self.v_grid[0]
    }

    pub fn at(&self, iu: usize, iv: usize) -> f64 {
        self.b_hat[iv * self.nu() + iu]
    }

    pub fn a_hat_y_at(&self, iu: usize, iv: usize) -> f64 {
        self.a_hat_y[iv * self.nu() + iu]
    }

    pub fn min_value(&self) -> f64 {
        self.b_hat.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_min(&self) -> f64 {
        let (nu, nv) = (self.nu(), self.nv());
        let mut m = f64::INFINITY;
        for iu in 0..nu {
            m = m.min(self.at(iu, 0)).min(self.at(iu, nv - 1));
        }
        for iv in 0..nv {
            m = m.min(self.at(0, iv)).min(self.at(nu - 1, iv));
        }
        m
    }

    /// Index of the grid point nearest to `(u, v)`.
    pub fn nearest(&self, u: f64, v: f64) -> (usize, usize) {
        let iu = ((u - self.u_grid[0]) / self.du()).round().clamp(0.0, (self.nu() - 1) as f64) as usize;
        let iv = ((v - self.v_grid[0]) / self.dv()).round().clamp(0.0, (self.nv() - 1) as f64) as usize;
        (iu, iv)
    }

    /// Tensor-product cubic Lagrange interpolation of `b̂` (exact for
    /// bicubic symbols); `None` outside the grid.
    pub fn interpolate(&self, u: f64, v: f64) -> Option<f64> {
        let (nu, nv) = (self.nu(), self.nv());
        let su = (u - self.u_grid[0]) / self.du();
        let sv = (v - self.v_grid[0]) / self.dv();
        if !(su >= 0.0 && sv >= 0.0 && su <= (nu - 1) as f64 && sv <= (nv - 1) as f64) {
            return None;
        }
        let (iu, wu) = cubic_weights(su, nu);
        let (iv, wv) = cubic_weights(sv, nv);
        let mut acc = 0.0;
        for (a, wa) in wv.iter().enumerate() {
            let row: f64 = wu.iter().enumerate().map(|(b, wb)| wb * self.at(iu + b, iv + a)).sum();
            acc += wa * row;
        }
        Some(acc)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        write_csv(out, &["u", "v", "b_hat"], &self.csv_rows())
    }

    pub fn write_csv_file(&self, path: &Path) -> io::Result<()> {
        write_csv_file(path, &["u", "v", "b_hat"], &self.csv_rows())
    }

    fn csv_rows(&self) -> Vec<Vec<Cell>> {
        let mut rows = Vec::with_capacity(self.b_hat.len());
        for (iv, &v) in self.v_grid.iter().enumerate() {
            for (iu, &u) in self.u_grid.iter().enumerate() {
                rows.push(vec![u.into(), v.into(), self.at(iu, iv).into()]);
            }
        }
        rows
    }
}

/// First node and weights of the 4-point Lagrange stencil around the
/// fractional index `s` on `n ≥ 4` nodes.
fn cubic_weights(s: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = s - i0 as f64;
    let mut w = [1.0; 4];
    for (k, wk) in w.iter_mut().enumerate() {
        for m in 0..4 {
            if m != k {
                *wk *= (t - m as f64) / (k as f64 - m as f64);
            }
        }
    }
    (i0, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{well_constants, FieldSpec, Point};
    use proptest::prelude::*;

    fn iso() -> FieldModel {
        FieldSpec::catalog("isotropic_quadratic").build().unwrap()
    }

    #[test]
    fn origin_maps_to_minimum() {
        for name in crate::field::CATALOG {
            let m = FieldSpec::catalog(name).build().unwrap();
            let (b, ay) = hat_fields(&m, 0.0, 0.0, 1e-14).unwrap();
            assert!((b - m.b(0.0, 0.0)).abs() < 1e-14 && ay.abs() < 1e-14, "{name}");
        }
    }

    #[test]
    fn constant_field_is_identity() {
        let m = FieldSpec::catalog("constant_field").build().unwrap();
        for (u, v) in [(0.3, -1.0), (-2.0, 2.5)] {
            assert_eq!(hat_fields(&m, u, v, 1e-14).unwrap(), (1.0, 0.0));
        }
    }

    #[test]
    fn round_trip_on_mesh() {
        let m = iso();
        let (b, _) = hat_fields(&m, 0.1, 0.2, 1e-14).unwrap();
        let x = invert_potential(&m, 0.1, 0.2, 1e-14).unwrap();
        assert!((m.potential(x, 0.2) - 0.1).abs() < 1e-14);
        assert!((b - m.b(x, 0.2)).abs() < 1e-14);
        for i in 0..=40 {
            let x = -1.0 + i as f64 * 0.05;
            let v = 0.2;
            let (bh, ay) = hat_fields(&m, m.potential(x, v), v, 1e-14).unwrap();
            assert!((bh - m.b(x, v)).abs() < 1e-11, "{x}");
            assert!((ay - m.a_y(x, v)).abs() < 1e-11);
        }
    }

    #[test]
    fn out_of_window() {
        let m = iso();
        assert!(matches!(hat_fields(&m, 1e3, 0.0, 1e-14), Err(EffectiveError::OutOfWindow { .. })));
    }

    #[test]
    fn grid_invariants() {
        let m = iso();
        let w = well_constants(&m, Point::ORIGIN).unwrap();
        let g = HatFieldGrid::build(&m, &w, 201).unwrap();
        assert!(g.min_value() >= w.b0 - 1e-14);
        assert!(g.min_value() - w.b0 < g.du().max(g.dv()).powi(2) * 4.0);
        assert!(g.boundary_min() >= g.e_max);
        let (iu, iv) = g.nearest(0.0, 0.0);
        assert!(g.a_hat_y_at(iu, iv).abs() < 2.0 * g.du().max(g.dv()));
    }

    #[test]
    fn interpolation_is_exact_on_quadratics() {
        let g = HatFieldGrid::from_fn((-1.0, 1.0), (-1.0, 1.0), (41, 37), 1.0, 0.5, |u, v| 1.0 + u * u + 2.0 * v * v - u * v);
        for (u, v) in [(0.013, -0.4), (0.5, 0.51), (-0.97, 0.9)] {
            let want = 1.0 + u * u + 2.0 * v * v - u * v;
            assert!((g.interpolate(u, v).unwrap() - want).abs() < 1e-12);
        }
        assert!(g.interpolate(1.01, 0.0).is_none());
    }

    #[test]
    fn csv_export_layout() {
        let g = HatFieldGrid::from_fn((0.0, 1.0), (0.0, 1.0), (2, 2), 1.0, 0.5, |u, v| u + 2.0 * v);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "u,v,b_hat");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("1.0000000000000000e0,1.0000000000000000e0,3.0000000000000000e0"));
    }

    #[test]
    fn hessian_transport() {
        // det(½ Hess b̂) at the minimum equals d / b₀².
        for name in ["anisotropic_quadratic", "cross_term", "quartic_confinement"] {
            let m = FieldSpec::catalog(name).build().unwrap();
            let w = well_constants(&m, Point::ORIGIN).unwrap();
            let e = 1e-3;
            let f = |u: f64, v: f64| hat_fields(&m, u, v, 1e-15).unwrap().0;
            let fuu = (f(e, 0.0) - 2.0 * f(0.0, 0.0) + f(-e, 0.0)) / (e * e);
            let fvv = (f(0.0, e) - 2.0 * f(0.0, 0.0) + f(0.0, -e)) / (e * e);
            let fuv = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e);
            let det = 0.25 * (fuu * fvv - fuv * fuv);
            let want = w.d / (w.b0 * w.b0);
            assert!((det - want).abs() < 0.01 * want, "{name}: {det} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_quartic(x in -1.5f64..1.5, v in -1.5f64..1.5) {
            let m = FieldSpec::catalog("quartic_confinement").build().unwrap();
            let (bh, _) = hat_fields(&m, m.potential(x, v), v, 1e-13).unwrap();
            prop_assert!((bh - m.b(x, v)).abs() <= 1e-9 * m.b(x, v));
        }
    }
}
