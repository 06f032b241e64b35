use num_complex::Complex64;
use serde::Serialize;

use super::{assemble_perturbed, lowest_eigs_with, DiscretizationConfig, PotentialPerturbation, SolverError, SolverOptions};
use crate::field::{FieldModel, Point};
use crate::quadrature::{gauss_legendre, integrate};

/// Potential perturbation `amplitude·(1 − r²/R²)⁴` on the disc of radius
/// `R` about `center`. It changes `b` only on that disc, which must lie in
/// `{b > b₀ + η}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BumpSpec {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
    pub eta: f64,
}

impl BumpSpec {
    fn chord(&self, x: f64) -> Option<(f64, f64)> {
        let dx = x - self.center.x;
        let s2 = self.radius * self.radius - dx * dx;
        (s2 > 0.0).then(|| {
            let s = s2.sqrt();
            (self.center.y - s, self.center.y + s)
        })
    }

    /// Smallest `b` over the closed disc, sampled on a polar grid.
    pub fn min_field_on_support(&self, model: &FieldModel) -> f64 {
        let mut best = f64::INFINITY;
        for ir in 0..=32 {
            let r = self.radius * ir as f64 / 32.0;
            for it in 0..128 {
                let t = 2.0 * std::f64::consts::PI * it as f64 / 128.0;
                best = best.min(model.b(self.center.x + r * t.cos(), self.center.y + r * t.sin()));
            }
        }
        best
    }
}

struct Bump {
    spec: BumpSpec,
    nodes: (Vec<f64>, Vec<f64>),
}

impl PotentialPerturbation for Bump {
    fn value(&self, x: f64, y: f64) -> f64 {
        let s = &self.spec;
        let q = ((x - s.center.x).powi(2) + (y - s.center.y).powi(2)) / (s.radius * s.radius);
        if q >= 1.0 {
            0.0
        } else {
            s.amplitude * (1.0 - q).powi(4)
        }
    }

    fn y_integral(&self, x: f64, y0: f64, y1: f64) -> f64 {
        let Some((c0, c1)) = self.spec.chord(x) else { return 0.0 };
        let (lo, hi, sign) = if y0 <= y1 { (y0, y1, 1.0) } else { (y1, y0, -1.0) };
        let (a, b) = (lo.max(c0), hi.min(c1));
        if a >= b {
            return 0.0;
        }
        // Polynomial of degree 8 in y on the chord: exact with 5 nodes.
        sign * integrate(|y| self.value(x, y), a, b, &self.nodes)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub h: f64,
    pub bump: BumpSpec,
    pub min_b_on_support: f64,
    pub eigenvalues: Vec<f64>,
    pub perturbed: Vec<f64>,
    /// `|λ_j − λ'_j|`.
    pub shifts: Vec<f64>,
    /// `|⟨u_j, (H' − H) u_j⟩|`, summed only over the changed entries, so it
    /// stays meaningful below the rounding level of the eigenvalues.
    pub first_order: Vec<f64>,
}

/// Lowest `m` eigenvalues with and without the bump on the same grid.
pub fn stability_experiment(
    model: &FieldModel,
    b0: f64,
    bump: &BumpSpec,
    cfg: &DiscretizationConfig,
    m: usize,
    opts: &SolverOptions,
) -> Result<StabilityReport, SolverError> {
    if !(bump.radius > 0.0) || !bump.amplitude.is_finite() {
        return Err(SolverError::Config(format!("invalid bump {bump:?}")));
    }
    let min_b = bump.min_field_on_support(model);
    let level = b0 + bump.eta;
    if !(min_b > level) {
        return Err(SolverError::BumpPrecondition { min_b, level });
    }
    let d = &cfg.domain;
    let c = bump.center;
    if c.x - bump.radius < d.x_min || c.x + bump.radius > d.x_max || c.y - bump.radius < d.y_min || c.y + bump.radius > d.y_max
    {
        return Err(SolverError::Config(format!("bump support leaves the box {d:?}")));
    }
    let pert = Bump { spec: *bump, nodes: gauss_legendre(5) };
    let h0 = assemble_perturbed(model, cfg, None)?;
    let h1 = assemble_perturbed(model, cfg, Some(&pert))?;
    let base = lowest_eigs_with(&h0, m, opts)?;
    let moved = lowest_eigs_with(&h1, m, opts)?;
    let shifts = base.eigenvalues.iter().zip(&moved.eigenvalues).map(|(a, b)| (a - b).abs()).collect();
    let changed: Vec<(usize, usize, Complex64)> = h1
        .matrix
        .triplets()
        .zip(h0.matrix.triplets())
        .filter(|(a, b)| a.2 != b.2)
        .map(|(a, b)| (a.0, a.1, a.2 - b.2))
        .collect();
    let area = cfg.cell_area();
    let first_order = base
        .eigenvectors
        .iter()
        .map(|u| {
            let s: Complex64 = changed.iter().map(|&(i, j, d)| u[i].conj() * d * u[j]).sum();
            s.norm() * area
        })
        .collect();
    Ok(StabilityReport {
        h: cfg.h,
        bump: *bump,
        min_b_on_support: min_b,
        eigenvalues: base.eigenvalues,
        perturbed: moved.eigenvalues,
        shifts,
        first_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldSpec, Rect};

    fn bump(amplitude: f64) -> BumpSpec {
        BumpSpec { center: Point::new(1.2, 0.0), radius: 0.2, amplitude, eta: 0.5 }
    }

    #[test]
    fn link_integral_is_exact() {
        let b = Bump { spec: bump(0.7), nodes: gauss_legendre(5) };
        let fine = gauss_legendre(40);
        for (x, y0, y1) in [(1.25f64, -0.3f64, 0.05f64), (1.1, 0.1, -0.5), (1.3, -1.0, 1.0), (0.5, -1.0, 1.0)] {
            let want = match b.spec.chord(x) {
                Some((c0, c1)) => {
                    let (lo, hi) = (y0.min(y1).max(c0), y0.max(y1).min(c1));
                    let v = if lo < hi { integrate(|y| b.value(x, y), lo, hi, &fine) } else { 0.0 };
                    if y0 <= y1 { v } else { -v }
                }
                None => 0.0,
            };
            assert!((b.y_integral(x, y0, y1) - want).abs() < 1e-15, "{x} {y0} {y1}");
        }
    }

    #[test]
    fn zero_bump_changes_nothing() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let cfg = DiscretizationConfig::new(Rect::square(1.6), 40, 40, 0.2);
        let r = stability_experiment(&m, 1.0, &bump(0.0), &cfg, 2, &SolverOptions::default()).unwrap();
        assert!(r.shifts.iter().all(|s| *s == 0.0));
        assert!(r.first_order.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn precondition_is_enforced() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let cfg = DiscretizationConfig::new(Rect::square(1.6), 40, 40, 0.2);
        let near = BumpSpec { center: Point::new(0.3, 0.0), ..bump(0.1) };
        assert!(matches!(
            stability_experiment(&m, 1.0, &near, &cfg, 2, &SolverOptions::default()),
            Err(SolverError::BumpPrecondition { .. })
        ));
    }
}
