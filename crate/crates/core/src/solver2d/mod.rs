//! Direct finite-difference discretization of
//!
//! ```text
//! H^h = h² D_x² + (h D_y + A(x, y))²
//! ```
//!
//! on a Dirichlet rectangle, and the side experiments built on it.
//!
//! The default scheme puts the magnetic potential into link phases along
//! `y`: on each vertical line `(hD_y + A)² = e^{−iχ/h} (hD_y)² e^{iχ/h}`
//! with `∂_yχ = A`, so the off-diagonal entry coupling `y_j` to `y_{j+k}`
//! carries `exp(i/h ∫_{y_j}^{y_{j+k}} A dy)`. Link integrals are exact for
//! polynomial potentials, which keeps any even stencil order intact.

mod export;
mod spectrum;
mod stability;

pub use export::{read_triplets, write_eigenvector_csv, write_triplets};
pub use spectrum::{
    agmon_mass, count_below, lower_bound_check, lowest_eigs, lowest_eigs_with, SolverOptions, SpectrumResult,
};
pub use stability::{stability_experiment, BumpSpec, StabilityReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, FieldModel, Rect, WellData};
use crate::linalg::{CsrMatrix, LinalgError};
use crate::stencil;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("eigensolver did not converge: {0}")]
    Convergence(LinalgError),
    #[error("threshold {threshold} is within 1e-12 of an eigenvalue: {below} eigenvalues below, {above} below the upper probe")]
    AmbiguousCount { threshold: f64, below: usize, above: usize },
    #[error("perturbation support meets the sublevel set: min b = {min_b} on the bump, need > {level}")]
    BumpPrecondition { min_b: f64, level: f64 },
    #[error(transparent)]
    Linalg(LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<LinalgError> for SolverError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotConverged { .. } => SolverError::Convergence(e),
            other => SolverError::Linalg(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeScheme {
    Peierls,
    Direct,
}

/// Largest admissible grid spacing in units of `√(h/b₀)`.
pub const MAX_SPACING_FACTOR: f64 = 0.15;

/// Well data the configuration is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WellBounds {
    pub b0: f64,
    pub gamma0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscretizationConfig {
    pub domain: Rect,
    /// Interior points along x and y.
    pub n_x: usize,
    pub n_y: usize,
    pub h: f64,
    pub gauge_scheme: GaugeScheme,
    /// Even order of the central stencils.
    pub order: usize,
    pub dirichlet: bool,
    /// When present, the spacing and box-margin rules are enforced.
    pub well: Option<WellBounds>,
}

impl DiscretizationConfig {
    /// Peierls, second order, no well checks.
    pub fn new(domain: Rect, n_x: usize, n_y: usize, h: f64) -> Self {
        DiscretizationConfig {
            domain,
            n_x,
            n_y,
            h,
            gauge_scheme: GaugeScheme::Peierls,
            order: 2,
            dirichlet: true,
            well: None,
        }
    }

    /// Box enclosing `{b ≤ b₀ + γ₀}` with margin `4√h`, spacing
    /// `spacing_factor·√(h/b₀)`. The model must have its minimum at the
    /// origin.
    pub fn for_well(
        model: &FieldModel,
        well: &WellData,
        h: f64,
        spacing_factor: f64,
        order: usize,
    ) -> Result<Self, SolverError> {
        if !(h > 0.0) {
            return Err(SolverError::Config(format!("h must be positive, got {h}")));
        }
        let bb = model.sublevel_bbox(well.b0 + well.gamma0)?;
        let margin = 4.0 * h.sqrt() * 1.02;
        let domain = bb.inflate(margin);
        if !model.domain().contains_rect(&domain) {
            return Err(SolverError::Config(format!(
                "box {domain:?} needed for h = {h} leaves the field domain {:?}",
                model.domain()
            )));
        }
        let step = spacing_factor * (h / well.b0).sqrt();
        let n_x = (domain.width() / step).ceil() as usize;
        let n_y = (domain.height() / step).ceil() as usize;
        Ok(DiscretizationConfig {
            domain,
            n_x,
            n_y,
            h,
            gauge_scheme: GaugeScheme::Peierls,
            order,
            dirichlet: true,
            well: Some(WellBounds { b0: well.b0, gamma0: well.gamma0 }),
        })
    }

    /// The smallest box containing both the current one and `rect`, with
    /// spacing no coarser than now.
    pub fn enlarged_to(&self, rect: &Rect) -> Self {
        let d = &self.domain;
        let domain = Rect::new(
            d.x_min.min(rect.x_min),
            d.x_max.max(rect.x_max),
            d.y_min.min(rect.y_min),
            d.y_max.max(rect.y_max),
        );
        let n_x = (domain.width() / self.dx()).ceil() as usize;
        let n_y = (domain.height() / self.dy()).ceil() as usize;
        DiscretizationConfig { domain, n_x, n_y, ..self.clone() }
    }

    pub fn dx(&self) -> f64 {
        self.domain.width() / (self.n_x + 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.domain.height() / (self.n_y + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + (i + 1) as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.domain.y_min + (j + 1) as f64 * self.dy()
    }

    pub fn dim(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Unknown index of node `(i, j)`; `y` runs fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_y + j
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn validate(&self, model: &FieldModel) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !self.dirichlet {
            return bad("only Dirichlet boundary conditions are supported".into());
        }
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return bad(format!("stencil order must be even and >= 2, got {}", self.order));
        }
        if self.gauge_scheme == GaugeScheme::Direct && self.order != 2 {
            return bad("the direct gauge scheme is second order only".into());
        }
        if self.n_x == 0 || self.n_y == 0 {
            return bad("the grid has no interior points".into());
        }
        if !model.domain().contains_rect(&self.domain) {
            return bad(format!("box {:?} leaves the field domain {:?}", self.domain, model.domain()));
        }
        if let Some(w) = self.well {
            let limit = MAX_SPACING_FACTOR * (self.h / w.b0).sqrt();
            if self.dx() > limit * (1.0 + 1e-12) || self.dy() > limit * (1.0 + 1e-12) {
                return bad(format!(
                    "grid spacing ({:.4e}, {:.4e}) exceeds 0.15·√(h/b₀) = {limit:.4e}",
                    self.dx(),
                    self.dy()
                ));
            }
            let need = model.sublevel_bbox(w.b0 + w.gamma0)?.inflate(4.0 * self.h.sqrt());
            if !self.domain.contains_rect(&need) {
                return bad(format!(
                    "box {:?} does not contain the sublevel set {{b ≤ b₀ + γ₀}} with margin 4√h ({need:?})",
                    self.domain
                ));
            }
        }
        Ok(())
    }
}

/// Extra potential added to `A`, with its exact `y`-integral.
pub(crate) trait PotentialPerturbation: Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn y_integral(&self, x: f64, y0: f64, y1: f64) -> f64;
}

/// An assembled operator together with its grid.
#[derive(Clone, Debug)]
pub struct MagneticOperator {
    pub matrix: CsrMatrix,
    pub config: DiscretizationConfig,
    /// Smallest `b` over the grid nodes; sets the shift-invert shift.
    pub field_floor: f64,
}

impl MagneticOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Default shift `0.5·h·b₀` (or 0 for fields without a positive floor).
    pub fn default_shift(&self) -> f64 {
        0.5 * self.config.h * self.field_floor.max(0.0)
    }
}

pub fn assemble(model: &FieldModel, cfg: &DiscretizationConfig) -> Result<MagneticOperator, SolverError> {
    assemble_perturbed(model, cfg, None)
}

pub(crate) fn assemble_perturbed(
    model: &FieldModel,
    cfg: &DiscretizationConfig,
    extra: Option<&dyn PotentialPerturbation>,
) -> Result<MagneticOperator, SolverError> {
    cfg.validate(model)?;
    let (nx, ny, h) = (cfg.n_x, cfg.n_y, cfg.h);
    let (dx, dy) = (cfg.dx(), cfg.dy());
    let w2 = stencil::second_derivative(cfg.order);
    let m = w2.len() - 1;
    let kx = h * h / (dx * dx);
    let ky = h * h / (dy * dy);
    let pot = |x: f64, y: f64| model.potential(x, y) + extra.map_or(0.0, |e| e.value(x, y));
    let link = |x: f64, y0: f64, y1: f64| {
        model.potential_y_integral(x, y0, y1) + extra.map_or(0.0, |e| e.y_integral(x, y0, y1))
    };
    let mut t: Vec<(usize, usize, Complex64)> = Vec::with_capacity(cfg.dim() * (4 * m + 1));
    let mut floor = f64::INFINITY;
    for i in 0..nx {
        let x = cfg.x(i);
        for j in 0..ny {
            let y = cfg.y(j);
            floor = floor.min(model.b(x, y));
            let p = cfg.index(i, j);
            let mut diag = -w2[0] * (kx + ky);
            if cfg.gauge_scheme == GaugeScheme::Direct {
                diag += pot(x, y).powi(2);
            }
            t.push((p, p, Complex64::new(diag, 0.0)));
            for k in 1..=m {
                if i + k < nx {
                    let q = cfg.index(i + k, j);
                    let v = Complex64::new(-w2[k] * kx, 0.0);
                    t.push((p, q, v));
                    t.push((q, p, v));
                }
                if j + k < ny {
                    let q = cfg.index(i, j + k);
                    let v = match cfg.gauge_scheme {
                        GaugeScheme::Peierls => {
                            let phase = link(x, y, cfg.y(j + k)) / h;
                            Complex64::from_polar(-w2[k] * ky, phase)
                        }
                        GaugeScheme::Direct => {
                            let a_mid = pot(x, y + 0.5 * dy);
                            Complex64::new(-w2[k] * ky, -h * a_mid / dy)
                        }
                    };
                    t.push((p, q, v));
                    t.push((q, p, v.conj()));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(cfg.dim(), t);
    let herm = matrix.hermiticity_residual();
    if herm > 1e-13 {
        return Err(SolverError::Config(format!("assembled matrix is not Hermitian (residual {herm:e})")));
    }
    Ok(MagneticOperator { matrix, config: cfg.clone(), field_floor: floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{well_constants, FieldSpec, Point};
    use crate::poly::Poly2;

    /// `(hD_y + A)² u` for `u = exp(−(x² + 2y²)) e^{ixy}` and
    /// `A = x + x³/3 + xy²`, by hand.
    fn magnetic_y_part(h: f64, x: f64, y: f64) -> Complex64 {
        let i = Complex64::i();
        let a = x + x * x * x / 3.0 + x * y * y;
        let ay = 2.0 * x * y;
        let u = (-(x * x + 2.0 * y * y)).exp() * Complex64::from_polar(1.0, x * y);
        // ∂_y u = g u,  g = −4y + ix
        let g = Complex64::new(-4.0 * y, x);
        let uy = g * u;
        let uyy = (g * g - 4.0) * u;
        // (hD_y + A)² u = −h² u_yy − ih (A_y u + 2 A u_y) + A² u
        -h * h * uyy - i * h * (ay * u + 2.0 * a * uy) + a * a * u
    }

    #[test]
    fn peierls_sign_matches_continuum() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let h = 0.3;
        for (scheme, order, tol) in [(GaugeScheme::Peierls, 6, 2e-5), (GaugeScheme::Direct, 2, 3e-3)] {
            let mut cfg = DiscretizationConfig::new(Rect::square(2.5), 1, 399, h);
            cfg.gauge_scheme = scheme;
            cfg.order = order;
            // One x-line at x = 0.6, so the x-stencil plays no role.
            cfg.domain = Rect::new(0.6 - 1.0, 0.6 + 1.0, -2.5, 2.5);
            let op = assemble(&m, &cfg).unwrap();
            let n = cfg.n_y;
            let x = cfg.x(0);
            let u: Vec<Complex64> = (0..n)
                .map(|j| {
                    let y = cfg.y(j);
                    (-(x * x + 2.0 * y * y)).exp() * Complex64::from_polar(1.0, x * y)
                })
                .collect();
            let mut hu = vec![Complex64::new(0.0, 0.0); n];
            op.matrix.matvec(&u, &mut hu);
            let kx = -stencil::second_derivative(order)[0] * h * h / (cfg.dx() * cfg.dx());
            let mut worst: f64 = 0.0;
            for j in n / 4..3 * n / 4 {
                let want = magnetic_y_part(h, x, cfg.y(j)) + kx * u[j];
                worst = worst.max((hu[j] - want).norm());
            }
            assert!(worst < tol, "{scheme:?}: {worst}");
        }
    }

    #[test]
    fn config_checks() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let w = well_constants(&m, Point::ORIGIN).unwrap();
        let cfg = DiscretizationConfig::for_well(&m, &w, 0.05, 0.12, 4).unwrap();
        cfg.validate(&m).unwrap();
        assert!(cfg.dx() <= 0.12 * 0.05f64.sqrt());
        let mut coarse = cfg.clone();
        coarse.n_x /= 2;
        assert!(matches!(coarse.validate(&m), Err(SolverError::Config(_))));
        let mut small = cfg.clone();
        small.domain = Rect::square(0.5);
        assert!(small.validate(&m).is_err());
        let mut direct4 = cfg.clone();
        direct4.gauge_scheme = GaugeScheme::Direct;
        assert!(direct4.validate(&m).is_err());
    }

    #[test]
    fn hermitian_assembly() {
        let m = FieldSpec::catalog("cross_term").build().unwrap();
        for scheme in [GaugeScheme::Peierls, GaugeScheme::Direct] {
            let mut cfg = DiscretizationConfig::new(Rect::square(1.5), 30, 34, 0.1);
            cfg.gauge_scheme = scheme;
            let op = assemble(&m, &cfg).unwrap();
            assert!(op.matrix.hermiticity_residual() <= 1e-13);
        }
        let zero = FieldModel::from_potential(Poly2::zero(), Rect::square(3.0));
        let op = assemble(&zero, &DiscretizationConfig::new(Rect::square(1.0), 5, 5, 1.0)).unwrap();
        assert_eq!(op.field_floor, 0.0);
        assert_eq!(op.default_shift(), 0.0);
    }
}
