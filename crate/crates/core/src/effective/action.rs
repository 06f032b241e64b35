//! Phase-space actions `S(E) = |{b̂ ≤ E}|` and Bohr–Sommerfeld levels.

use rayon::prelude::*;
use serde::Serialize;

use super::{EffectiveError, HatFieldGrid};
use crate::field::FieldModel;
use crate::quadrature::{gauss_legendre, integrate};

#[derive(Clone, Debug, Serialize)]
pub struct ActionProfile {
    pub energies: Vec<f64>,
    pub actions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BSLevels {
    pub h: f64,
    pub levels: Vec<f64>,
}

/// Each grid cell split into two triangles, vertex values sorted.
struct Triangles {
    /// Sorted by the smallest vertex value.
    values: Vec<[f64; 3]>,
    area: f64,
}

impl Triangles {
    fn new(g: &HatFieldGrid) -> Self {
        let mut values = Vec::with_capacity(2 * (g.nu() - 1) * (g.nv() - 1));
        for iv in 0..g.nv() - 1 {
            for iu in 0..g.nu() - 1 {
                let (a, b, c, d) = (g.at(iu, iv), g.at(iu + 1, iv), g.at(iu, iv + 1), g.at(iu + 1, iv + 1));
                for mut t in [[a, b, d], [a, c, d]] {
                    t.sort_by(f64::total_cmp);
                    values.push(t);
                }
            }
        }
        values.sort_by(|p, q| p[0].total_cmp(&q[0]));
        Triangles { values, area: 0.5 * g.du() * g.dv() }
    }

    /// Area of `{b̂ ≤ e}` for the piecewise-linear interpolant.
    fn area_below(&self, e: f64) -> f64 {
        let end = self.values.partition_point(|t| t[0] < e);
        let partial: Vec<f64> = self.values[..end]
            .par_chunks(4096)
            .map(|chunk| chunk.iter().map(|t| fraction_below(t, e)).sum::<f64>())
            .collect();
        partial.iter().sum::<f64>() * self.area
    }
}

/// Fraction of a triangle where the linear interpolant of the sorted vertex
/// values `f` lies below `e`.
fn fraction_below(f: &[f64; 3], e: f64) -> f64 {
    let [f1, f2, f3] = *f;
    if e <= f1 {
        0.0
    } else if e >= f3 {
        1.0
    } else if e <= f2 {
        (e - f1) * (e - f1) / ((f2 - f1) * (f3 - f1))
    } else {
        1.0 - (f3 - e) * (f3 - e) / ((f3 - f1) * (f3 - f2))
    }
}

pub fn action_profile(grid: &HatFieldGrid, energies: &[f64]) -> Result<ActionProfile, EffectiveError> {
    if let Some(&e) = energies.iter().find(|&&e| e > grid.e_max) {
        return Err(EffectiveError::EnergyAboveWindow { energy: e, e_max: grid.e_max });
    }
    let tri = Triangles::new(grid);
    let actions = energies.iter().map(|&e| tri.area_below(e)).collect();
    Ok(ActionProfile { energies: energies.to_vec(), actions })
}

/// Solves `S(E_n) = 2πh(n + ½)` for every level below the ceiling.
pub fn bs_levels(grid: &HatFieldGrid, h: f64) -> Result<BSLevels, EffectiveError> {
    const PROFILE: usize = 512;
    let tri = Triangles::new(grid);
    let lo = grid.min_value();
    let energies: Vec<f64> = (0..=PROFILE).map(|i| lo + (grid.e_max - lo) * i as f64 / PROFILE as f64).collect();
    let actions: Vec<f64> = energies.iter().map(|&e| tri.area_below(e)).collect();
    let s_max = *actions.last().unwrap();
    let mut levels = Vec::new();
    for n in 0.. {
        let target = 2.0 * std::f64::consts::PI * h * (n as f64 + 0.5);
        if target > s_max {
            break;
        }
        let k = actions.partition_point(|&s| s < target).max(1);
        let (mut a, mut b) = (energies[k - 1], energies[k]);
        if actions[k] <= actions[k - 1] {
            return Err(EffectiveError::Resolution { level: n });
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if tri.area_below(m) < target {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 4.0 * f64::EPSILON * b.abs() {
                break;
            }
        }
        levels.push(0.5 * (a + b));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        let level = levels.windows(2).position(|w| w[1] <= w[0]).unwrap() + 1;
        return Err(EffectiveError::Resolution { level });
    }
    Ok(BSLevels { h, levels })
}

/// `∫_{b ≤ level} b dx dy` by polar quadrature about the origin, which must
/// be the minimum of a star-shaped sublevel set. Equal to the phase-space
/// area of `{b̂ ≤ level}`, since `det Dφ = b`; used as an oracle
/// independent of the `(u, v)` grid.
pub fn sublevel_flux(model: &FieldModel, level: f64, n_theta: usize) -> f64 {
    let gl = gauss_legendre(48);
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
    (0..n_theta)
        .map(|k| {
            let th = (k as f64 + 0.5) * dtheta;
            let (c, s) = (th.cos(), th.sin());
            let along = |r: f64| model.b(r * c, r * s);
            let mut hi = 0.1;
            while along(hi) <= level {
                hi *= 1.5;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if along(m) <= level {
                    lo = m;
                } else {
                    hi = m;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            integrate(|r| along(r) * r, 0.0, 0.5 * (lo + hi), &gl)
        })
        .sum::<f64>()
        * dtheta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gauge_normalize, well_constants, FieldSpec, Point};
    use std::f64::consts::PI;

    fn disc(n: usize) -> HatFieldGrid {
        HatFieldGrid::from_fn((-1.0, 1.0), (-1.0, 1.0), (n, n), 1.0, 0.6, |u, v| 1.0 + u * u + v * v)
    }

    #[test]
    fn disc_area() {
        let p = action_profile(&disc(400), &[1.25]).unwrap();
        assert!((p.actions[0] - PI * 0.25).abs() < 1e-3);
    }

    #[test]
    fn ellipse_area() {
        let g = HatFieldGrid::from_fn((-1.0, 1.0), (-0.6, 0.6), (400, 400), 1.0, 0.6, |u, v| 1.0 + u * u + 4.0 * v * v);
        let p = action_profile(&g, &[1.5]).unwrap();
        assert!((p.actions[0] - PI * 0.25).abs() < 1e-3);
    }

    #[test]
    fn profile_is_monotone_and_vanishes_at_bottom() {
        let g = disc(101);
        let es: Vec<f64> = (0..=50).map(|i| 1.0 + 0.6 * i as f64 / 50.0).collect();
        let p = action_profile(&g, &es).unwrap();
        assert_eq!(p.actions[0], 0.0);
        assert!(p.actions.windows(2).all(|w| w[1] >= w[0]));
        assert!(action_profile(&g, &[1.7]).is_err());
    }

    #[test]
    fn harmonic_levels() {
        let h = 0.05;
        let l = bs_levels(&disc(801), h).unwrap();
        for (n, e) in l.levels.iter().enumerate() {
            assert!((e - (1.0 + 2.0 * h * (n as f64 + 0.5))).abs() < 2e-4, "{n}: {e}");
        }
        assert_eq!(l.levels.len(), 6);
        let g = HatFieldGrid::from_fn((-1.0, 1.0), (-0.6, 0.6), (801, 801), 1.0, 0.6, |u, v| 1.0 + u * u + 4.0 * v * v);
        let l = bs_levels(&g, h).unwrap();
        for (n, e) in l.levels.iter().enumerate() {
            assert!((e - (1.0 + 4.0 * h * (n as f64 + 0.5))).abs() < 2e-4);
        }
        assert!(l.levels[0] > 1.0);
    }

    #[test]
    fn level_count_matches_action() {
        let g = disc(401);
        for h in [0.013, 0.02, 0.031] {
            let l = bs_levels(&g, h).unwrap();
            let s = action_profile(&g, &[g.e_max]).unwrap().actions[0];
            let want = (s / (2.0 * PI * h) + 0.5).floor() as i64;
            assert!((l.levels.len() as i64 - want).abs() <= 1);
        }
    }

    #[test]
    fn quartic_action_matches_flux_oracle() {
        let m = gauge_normalize(&FieldSpec::catalog("quartic_confinement").build().unwrap());
        let w = well_constants(&m, Point::ORIGIN).unwrap();
        let g = HatFieldGrid::build(&m, &w, 401).unwrap();
        for e in [w.b0 + 0.2 * w.gamma0, w.b0 + 0.6 * w.gamma0, g.e_max] {
            let s = action_profile(&g, &[e]).unwrap().actions[0];
            let oracle = sublevel_flux(&m, e, 256);
            assert!((s - oracle).abs() < 1e-3 * oracle, "{e}: {s} vs {oracle}");
        }
    }

    #[test]
    fn richardson_action() {
        // Halving the cell size cuts the error by about four.
        let exact = PI * 0.3;
        let e1 = (action_profile(&disc(101), &[1.3]).unwrap().actions[0] - exact).abs();
        let e2 = (action_profile(&disc(201), &[1.3]).unwrap().actions[0] - exact).abs();
        assert!(e2 < e1 && e1 / e2 > 2.5, "{e1} {e2}");
    }

    #[test]
    fn flux_oracle_on_isotropic_field() {
        // ∫_{r² ≤ R²} (1 + r²) = 2π(R²/2 + R⁴/4).
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let f = sublevel_flux(&m, 1.5, 64);
        assert!((f - 2.0 * PI * (0.25 + 0.0625)).abs() < 1e-12);
    }
}
