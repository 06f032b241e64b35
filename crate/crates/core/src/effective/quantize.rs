//! Weyl quantization of `b̂(v, η)` on a periodic Fourier basis.
//!
//! The second grid axis `v` is position and the first, `u`, is the dual
//! momentum `η`. On `N = 2K + 1` points `v_j` of a box of side `L` with
//! momenta `η_m = 2πhm/L`,
//!
//! ```text
//! M_jk = (1/N) Σ_m p((v_j + v_k)/2, η_m) exp(i η_m (v_j − v_k) / h),
//! ```
//!
//! with separations and midpoints taken in the periodic sense.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{EffectiveError, HatFieldGrid};
use crate::linalg::hermitian_eigh;

#[derive(Clone, Debug)]
pub struct QuantizeOptions {
    /// Momentum box over the largest `|u|` of the grid.
    pub oversample: f64,
    /// Collar width over `γ₀` for the extension above `E_max`.
    pub collar: f64,
    pub max_modes: usize,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions { oversample: 1.5, collar: 0.1, max_modes: 4001 }
    }
}

/// Lowest `n_modes` eigenvalues of the quantized symbol.
pub fn quantize_1d(grid: &HatFieldGrid, h: f64, n_modes: usize) -> Result<Vec<f64>, EffectiveError> {
    quantize_1d_with(grid, h, n_modes, &QuantizeOptions::default())
}

pub fn quantize_1d_with(
    grid: &HatFieldGrid,
    h: f64,
    n_modes: usize,
    opts: &QuantizeOptions,
) -> Result<Vec<f64>, EffectiveError> {
    if !(h > 0.0) {
        return Err(EffectiveError::InvalidGrid(format!("h = {h}")));
    }
    let boundary = grid.boundary_min();
    if boundary < grid.e_max {
        return Err(EffectiveError::Aliasing(format!(
            "sublevel set touches the box: boundary minimum {boundary} < E_max = {}",
            grid.e_max
        )));
    }
    let v0 = grid.v_grid[0];
    let len = grid.v_grid[grid.nv() - 1] - v0;
    let umax = grid.u_grid[0].abs().max(grid.u_grid[grid.nu() - 1].abs());
    let k = (opts.oversample * umax * len / (2.0 * std::f64::consts::PI * h)).ceil() as usize;
    let n = (2 * k + 1).max(2 * (n_modes / 2) + 1);
    if n > opts.max_modes {
        return Err(EffectiveError::Aliasing(format!("the box needs {n} Fourier modes (limit {})", opts.max_modes)));
    }
    let k = (n - 1) / 2;
    let dv = len / n as f64;
    let w = opts.collar * grid.gamma0;
    let ceiling = grid.e_max + w;
    // Outside the grid the symbol is continued by its value on the nearest
    // edge, which already lies above E_max.
    let (ulo, uhi) = (grid.u_grid[0], grid.u_grid[grid.nu() - 1]);
    let extend = |val: f64| {
        if val <= grid.e_max {
            val
        } else if w == 0.0 {
            grid.e_max
        } else {
            grid.e_max + w * ((val - grid.e_max) / w).tanh()
        }
    };
    let momenta: Vec<f64> = (0..n).map(|m| 2.0 * std::f64::consts::PI * h * (m as f64 - k as f64) / len).collect();
    // Symbol on the half-lattice of midpoints: position v0 + (t + 1) dv/2.
    let table: Vec<Vec<f64>> = (0..2 * n)
        .map(|t| {
            let v = v0 + 0.5 * (t as f64 + 1.0) * dv;
            momenta.iter().map(|&eta| extend(grid.interpolate(eta.clamp(ulo, uhi), v).unwrap_or(ceiling))).collect()
        })
        .collect();
    let phases: Vec<Complex64> = (0..n).map(|d| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * d as f64 / n as f64)).collect();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for kk in 0..n {
            let mut d = j as isize - kk as isize;
            if d > k as isize {
                d -= n as isize;
            } else if d < -(k as isize) {
                d += n as isize;
            }
            let t = (2 * kk as isize + d).rem_euclid(2 * n as isize) as usize;
            let row = &table[t];
            let mut s = Complex64::new(0.0, 0.0);
            for (m, p) in row.iter().enumerate() {
                // exp(i η_m d dv / h) = exp(2πi (m − K) d / N)
                let idx = ((m as isize - k as isize) * d).rem_euclid(n as isize) as usize;
                s += phases[idx] * *p;
            }
            mat[(j, kk)] = s / n as f64;
        }
    }
    let scale = mat.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut herm: f64 = 0.0;
    for j in 0..n {
        for kk in 0..=j {
            herm = herm.max((mat[(j, kk)] - mat[(kk, j)].conj()).norm());
        }
    }
    if herm / scale > 1e-10 {
        return Err(EffectiveError::NonHermitian(herm / scale));
    }
    let (vals, _) = hermitian_eigh(mat);
    Ok(vals.into_iter().take(n_modes).collect())
}
