use num_complex::Complex64;
use serde::Serialize;

use super::{DiscretizationConfig, MagneticOperator, SolverError};
use crate::field::FieldModel;
use crate::linalg::eigen::{lobpcg_lowest, shift_invert_lowest};
use crate::linalg::{EigenOptions, EigenPairs, HermitianBand};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative residual `‖Hv − λv‖ / |λ|` required of every pair.
    pub tol: f64,
    /// Largest band factor, in bytes, before switching to LOBPCG.
    pub memory_budget: usize,
    /// Shift for the factorization; defaults to `0.5·h·b_min`.
    pub shift: Option<f64>,
    pub seed: u64,
    pub lobpcg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, memory_budget: 2 << 30, shift: None, seed: 0x5eed, lobpcg_max_iter: 5000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Normalized so that `Σ |u|² Δx Δy = 1`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// `‖Hv − λv‖` for unit Euclidean `v`.
    pub residuals: Vec<f64>,
    /// Set where a neighbour lies within `1e-12` (relative).
    pub clustered: Vec<bool>,
    pub method: &'static str,
    pub iterations: usize,
    pub config: DiscretizationConfig,
}

pub fn lowest_eigs(op: &MagneticOperator, m: usize, tol: f64) -> Result<SpectrumResult, SolverError> {
    lowest_eigs_with(op, m, &SolverOptions { tol, ..Default::default() })
}

pub fn lowest_eigs_with(op: &MagneticOperator, m: usize, opts: &SolverOptions) -> Result<SpectrumResult, SolverError> {
    let eopts = EigenOptions { tol: opts.tol, seed: opts.seed, ..Default::default() };
    let n = op.dim();
    let bw = op.matrix.bandwidth();
    let (pairs, method): (EigenPairs, _) = if HermitianBand::storage_bytes(n, bw) <= opts.memory_budget {
        let sigma = opts.shift.unwrap_or_else(|| op.default_shift());
        let factor = op.matrix.to_band().shifted(sigma).ldl()?;
        (shift_invert_lowest(&op.matrix, &factor, m, &eopts)?, "shift-invert")
    } else {
        (lobpcg_lowest(&op.matrix, m, &eopts, opts.lobpcg_max_iter)?, "lobpcg")
    };
    let scale = op.config.cell_area().sqrt();
    let eigenvectors = pairs
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|z| z / scale).collect())
        .collect();
    let vals = &pairs.values;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let clustered = (0..vals.len())
        .map(|j| (j > 0 && close(vals[j - 1], vals[j])) || (j + 1 < vals.len() && close(vals[j], vals[j + 1])))
        .collect();
    Ok(SpectrumResult {
        eigenvalues: pairs.values,
        eigenvectors,
        residuals: pairs.residuals,
        clustered,
        method,
        iterations: pairs.iterations,
        config: op.config.clone(),
    })
}

/// Number of eigenvalues strictly below `threshold`, from the inertia of
/// `H − threshold`. Probes at `threshold ± 1e-12·max(1, |threshold|)`; if
/// the two counts differ the answer is ambiguous.
pub fn count_below(op: &MagneticOperator, threshold: f64) -> Result<usize, SolverError> {
    let band = op.matrix.to_band();
    let eps = 1e-12 * threshold.abs().max(1.0);
    let probe = |s: f64| band.shifted(s).ldl().map(|f| f.negative_count());
    match (probe(threshold - eps), probe(threshold + eps)) {
        (Ok(below), Ok(above)) if below == above => Ok(below),
        (Ok(below), Ok(above)) => Err(SolverError::AmbiguousCount { threshold, below, above }),
        (Err(e), _) | (_, Err(e)) => Err(e.into()),
    }
}

fn weighted_sum(result: &SpectrumResult, j: usize, mut weight: impl FnMut(f64, f64) -> f64) -> f64 {
    let cfg = &result.config;
    let u = &result.eigenvectors[j];
    let mut s = 0.0;
    for i in 0..cfg.n_x {
        let x = cfg.x(i);
        for k in 0..cfg.n_y {
            s += weight(x, cfg.y(k)) * u[cfg.index(i, k)].norm_sqr();
        }
    }
    s * cfg.cell_area()
}

/// `∫_{b > level} |u_j|²` for each eigenvector.
pub fn agmon_mass(result: &SpectrumResult, model: &FieldModel, level: f64) -> Vec<f64> {
    (0..result.eigenvectors.len())
        .map(|j| weighted_sum(result, j, |x, y| if model.b(x, y) > level { 1.0 } else { 0.0 }))
        .collect()
}

/// `λ_j − h ∫ |b| |u_j|²`, which should be non-negative.
pub fn lower_bound_check(result: &SpectrumResult, model: &FieldModel) -> Vec<f64> {
    let h = result.config.h;
    (0..result.eigenvectors.len())
        .map(|j| result.eigenvalues[j] - h * weighted_sum(result, j, |x, y| model.b(x, y).abs()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldSpec, Rect};
    use crate::poly::Poly2;
    use crate::solver2d::assemble;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_laplacian() {
        let zero = FieldModel::from_potential(Poly2::zero(), Rect::square(4.0));
        let cfg = DiscretizationConfig::new(Rect::new(0.0, PI, 0.0, PI), 60, 60, 1.0);
        let op = assemble(&zero, &cfg).unwrap();
        let r = lowest_eigs(&op, 4, 1e-10).unwrap();
        // Discrete modes: Σ (4/Δ²) sin²(kΔ/2) over the two directions.
        let d = cfg.dx();
        let mode = |k: f64| 4.0 / (d * d) * (0.5 * k * d).sin().powi(2);
        let exact = [mode(1.0) * 2.0, mode(1.0) + mode(2.0), mode(1.0) + mode(2.0), mode(2.0) * 2.0];
        for ((got, want), cont) in r.eigenvalues.iter().zip(exact).zip([2.0, 5.0, 5.0, 8.0]) {
            assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
            assert!((got - cont).abs() < 2e-3 * cont);
        }
        assert!(r.clustered[1] && r.clustered[2] && !r.clustered[0]);
        for v in &r.eigenvectors {
            let mass: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() * cfg.cell_area();
            assert!((mass - 1.0).abs() < 1e-12);
        }
        assert_eq!(count_below(&op, 5.5).unwrap(), 3);
        assert_eq!(count_below(&op, 1.0).unwrap(), 0);
    }

    #[test]
    fn landau_level() {
        let m = FieldSpec::catalog("constant_field").build().unwrap();
        let h = 0.1;
        // The lowest Landau level is nearly degenerate in a large box; keep
        // it small so only a handful of states sit at the bottom.
        let mut cfg = DiscretizationConfig::new(Rect::square(1.5), 50, 50, h);
        cfg.order = 4;
        let op = assemble(&m, &cfg).unwrap();
        let r = lowest_eigs(&op, 1, 1e-9).unwrap();
        assert!((r.eigenvalues[0] - h).abs() < 5e-3 * h, "{}", r.eigenvalues[0]);
        for res in &r.residuals {
            assert!(*res <= 1e-9 * h);
        }
        for margin in lower_bound_check(&r, &m) {
            assert!(margin >= -1e-6);
        }
    }

    #[test]
    fn ambiguous_counts_are_reported() {
        let zero = FieldModel::from_potential(Poly2::zero(), Rect::square(4.0));
        let op = assemble(&zero, &DiscretizationConfig::new(Rect::new(0.0, 1.0, 0.0, 1.0), 3, 3, 1.0)).unwrap();
        let r = lowest_eigs(&op, 1, 1e-12).unwrap();
        assert!(matches!(count_below(&op, r.eigenvalues[0]), Err(SolverError::AmbiguousCount { below: 0, above: 1, .. })));
    }

    #[test]
    fn lobpcg_fallback_agrees() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let cfg = DiscretizationConfig::new(Rect::square(1.6), 30, 30, 0.2);
        let op = assemble(&m, &cfg).unwrap();
        let a = lowest_eigs(&op, 2, 1e-9).unwrap();
        let b = lowest_eigs_with(&op, 2, &SolverOptions { tol: 1e-9, memory_budget: 0, ..Default::default() }).unwrap();
        assert_eq!(b.method, "lobpcg");
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-8 * x, "{x} vs {y}");
        }
    }
}
