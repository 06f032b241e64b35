//! Magnetic potentials, the field `b = ∂A/∂x`, and the magnetic well.
//!
//! The operator is `h²D_x² + (hD_y + A(x, y))²` on the plane. Everything the
//! rest of the crate needs about `A` lives here: the field and its
//! derivatives (exact, since `A` is a polynomial), the location and depth of
//! the unique non-degenerate minimum of `b`, the well constants `a` and `d`,
//! and the normal gauge `A(0,0) = 0`, `∂_yA(0,0) = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Closed axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    pub fn square(half_width: f64) -> Self {
        Rect::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)
    }

    /// Rectangle grown by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> Rect {
        Rect::new(
            self.x_min - margin,
            self.x_max + margin,
            self.y_min - margin,
            self.y_max + margin,
        )
    }

    /// Scales about the center.
    pub fn scaled(&self, factor: f64) -> Rect {
        let cx = 0.5 * (self.x_min + self.x_max);
        let cy = 0.5 * (self.y_min + self.y_max);
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        Rect::new(cx - hw, cx + hw, cy - hh, cy + hh)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("point ({x}, {y}) lies outside the trusted domain box")]
    OutsideDomain { x: f64, y: f64 },
    #[error("unknown catalog field '{0}'")]
    UnknownCatalog(String),
    #[error("no interior minimum of b found: {0}")]
    NoInteriorMinimum(String),
    #[error("degenerate minimum: Hess b at ({x}, {y}) is not positive definite (eigenvalues {ev:?})")]
    Degenerate { x: f64, y: f64, ev: [f64; 2] },
    #[error("field minimum b0 = {0} is not positive")]
    NonPositiveField(f64),
    #[error("sublevel set {{b <= {level}}} reaches the domain box boundary")]
    SublevelNotEnclosed { level: f64 },
    #[error("invalid field specification: {0}")]
    InvalidSpec(String),
}

/// Names of the built-in fields.
pub const CATALOG: &[&str] = &[
    "isotropic_quadratic",
    "anisotropic_quadratic",
    "cross_term",
    "quartic_confinement",
    "constant_field",
];

/// How a field is described in a run configuration: a catalog name or the
/// coefficients of the potential `A` as `[x power, y power, coefficient]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Catalog(String),
    Polynomial {
        terms: Vec<(u32, u32, f64)>,
        #[serde(default)]
        domain: Option<[f64; 4]>,
    },
}

impl FieldSpec {
    pub fn catalog(name: &str) -> Self {
        FieldSpec::Catalog(name.to_string())
    }

    pub fn build(&self) -> Result<FieldModel, FieldError> {
        match self {
            FieldSpec::Catalog(name) => catalog_potential(name)
                .map(|a| FieldModel::with_spec(self.clone(), a, DEFAULT_DOMAIN)),
            FieldSpec::Polynomial { terms, domain } => {
                let domain = match domain {
                    Some([x0, x1, y0, y1]) => {
                        if !(x0 < x1 && y0 < y1) {
                            return Err(FieldError::InvalidSpec(format!(
                                "empty domain box {:?}",
                                domain
                            )));
                        }
                        Rect::new(*x0, *x1, *y0, *y1)
                    }
                    None => DEFAULT_DOMAIN,
                };
                if terms.iter().any(|t| !t.2.is_finite()) {
                    return Err(FieldError::InvalidSpec("non-finite coefficient".into()));
                }
                Ok(FieldModel::with_spec(
                    self.clone(),
                    Poly2::from_terms(terms.iter().copied()),
                    domain,
                ))
            }
        }
    }
}

const DEFAULT_DOMAIN: Rect = Rect { x_min: -3.0, x_max: 3.0, y_min: -3.0, y_max: 3.0 };

fn catalog_potential(name: &str) -> Result<Poly2, FieldError> {
    let third = 1.0 / 3.0;
    let a = match name {
        // b = 1 + x² + y²
        "isotropic_quadratic" => Poly2::from_terms([(1, 0, 1.0), (3, 0, third), (1, 2, 1.0)]),
        // b = 1 + x² + 4y²
        "anisotropic_quadratic" => Poly2::from_terms([(1, 0, 1.0), (3, 0, third), (1, 2, 4.0)]),
        // b = 1 + x² + xy + y²
        "cross_term" => {
            Poly2::from_terms([(1, 0, 1.0), (3, 0, third), (2, 1, 0.5), (1, 2, 1.0)])
        }
        // b = 1 + x² + y² + 0.3x²y² + 0.5x⁴ + 0.5y⁴
        "quartic_confinement" => Poly2::from_terms([
            (1, 0, 1.0),
            (3, 0, third),
            (1, 2, 1.0),
            (3, 2, 0.1),
            (5, 0, 0.1),
            (1, 4, 0.5),
        ]),
        // b ≡ 1
        "constant_field" => Poly2::from_terms([(1, 0, 1.0)]),
        other => return Err(FieldError::UnknownCatalog(other.to_string())),
    };
    Ok(a)
}

/// The magnetic potential `A` together with its exact derivatives.
///
/// Immutable once built; every method is a pure function of the model.
#[derive(Clone, Debug)]
pub struct FieldModel {
    spec: FieldSpec,
    potential: Poly2,
    potential_y_prim: Poly2,
    a_y: Poly2,
    b: Poly2,
    b_x: Poly2,
    b_y: Poly2,
    b_xx: Poly2,
    b_xy: Poly2,
    b_yy: Poly2,
    domain: Rect,
}

impl FieldModel {
    pub fn from_potential(potential: Poly2, domain: Rect) -> Self {
        let spec = FieldSpec::Polynomial {
            terms: potential.terms().to_vec(),
            domain: Some([domain.x_min, domain.x_max, domain.y_min, domain.y_max]),
        };
        FieldModel::with_spec(spec, potential, domain)
    }

    fn with_spec(spec: FieldSpec, potential: Poly2, domain: Rect) -> Self {
        let b = potential.dx();
        let b_x = b.dx();
        let b_y = b.dy();
        FieldModel {
            spec,
            potential_y_prim: potential.integrate_y(),
            a_y: potential.dy(),
            b_xx: b_x.dx(),
            b_xy: b_x.dy(),
            b_yy: b_y.dy(),
            b,
            b_x,
            b_y,
            potential,
            domain,
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn potential_poly(&self) -> &Poly2 {
        &self.potential
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn with_domain(&self, domain: Rect) -> Self {
        let mut m = self.clone();
        m.domain = domain;
        m
    }

    /// `A(x, y)`.
    pub fn potential(&self, x: f64, y: f64) -> f64 {
        self.potential.eval(x, y)
    }

    /// `∫_{y0}^{y1} A(x, y) dy`, exact.
    pub fn potential_y_integral(&self, x: f64, y0: f64, y1: f64) -> f64 {
        self.potential_y_prim.eval(x, y1) - self.potential_y_prim.eval(x, y0)
    }

    /// `∂A/∂y`.
    pub fn a_y(&self, x: f64, y: f64) -> f64 {
        self.a_y.eval(x, y)
    }

    /// `b = ∂A/∂x`, without the domain check.
    pub fn b(&self, x: f64, y: f64) -> f64 {
        self.b.eval(x, y)
    }

    pub fn grad_b(&self, x: f64, y: f64) -> [f64; 2] {
        [self.b_x.eval(x, y), self.b_y.eval(x, y)]
    }

    pub fn hess_b(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let xy = self.b_xy.eval(x, y);
        [[self.b_xx.eval(x, y), xy], [xy, self.b_yy.eval(x, y)]]
    }

    /// Shifts coordinates so that `p` becomes the origin.
    pub fn translated(&self, p: Point) -> Self {
        FieldModel::from_potential(
            self.potential.shifted(p.x, p.y),
            self.domain.shifted(-p.x, -p.y),
        )
    }

    /// Infimum of `b` over the boundary of `rect`, by dense sampling of each
    /// edge followed by golden-section refinement around the best sample.
    pub fn boundary_infimum(&self, rect: &Rect) -> f64 {
        const N: usize = 2000;
        let edges: [(Point, Point); 4] = [
            (Point::new(rect.x_min, rect.y_min), Point::new(rect.x_max, rect.y_min)),
            (Point::new(rect.x_max, rect.y_min), Point::new(rect.x_max, rect.y_max)),
            (Point::new(rect.x_max, rect.y_max), Point::new(rect.x_min, rect.y_max)),
            (Point::new(rect.x_min, rect.y_max), Point::new(rect.x_min, rect.y_min)),
        ];
        let mut best = f64::INFINITY;
        for (p, q) in edges {
            let at = |t: f64| self.b(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
            let (mut kbest, mut vbest) = (0, f64::INFINITY);
            for k in 0..=N {
                let v = at(k as f64 / N as f64);
                if v < vbest {
                    kbest = k;
                    vbest = v;
                }
            }
            let lo = (kbest.saturating_sub(1)) as f64 / N as f64;
            let hi = ((kbest + 1).min(N)) as f64 / N as f64;
            best = best.min(vbest).min(golden_min(&at, lo, hi));
        }
        best
    }

    /// Bounding box of `{b <= level}` inside the domain box, grown by one
    /// sampling cell.
    pub fn sublevel_bbox(&self, level: f64) -> Result<Rect, FieldError> {
        const N: usize = 600;
        let d = self.domain;
        let (dx, dy) = (d.width() / N as f64, d.height() / N as f64);
        let mut bb = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=N {
            let x = d.x_min + i as f64 * dx;
            for j in 0..=N {
                let y = d.y_min + j as f64 * dy;
                if self.b(x, y) <= level {
                    if i == 0 || i == N || j == 0 || j == N {
                        return Err(FieldError::SublevelNotEnclosed { level });
                    }
                    bb.x_min = bb.x_min.min(x);
                    bb.x_max = bb.x_max.max(x);
                    bb.y_min = bb.y_min.min(y);
                    bb.y_max = bb.y_max.max(y);
                }
            }
        }
        if bb.x_min > bb.x_max {
            return Err(FieldError::NoInteriorMinimum(format!(
                "the sublevel set {{b <= {level}}} is empty on the sampling grid"
            )));
        }
        Ok(Rect::new(bb.x_min - dx, bb.x_max + dx, bb.y_min - dy, bb.y_max + dy))
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b))
}

/// `b(p)`, exact for polynomial potentials.
pub fn eval_field(model: &FieldModel, p: Point) -> Result<f64, FieldError> {
    if !model.domain.contains(p) {
        return Err(FieldError::OutsideDomain { x: p.x, y: p.y });
    }
    Ok(model.b(p.x, p.y))
}

pub const DEFAULT_MIN_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const SCAN_POINTS: usize = 201;

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: &[[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[0][1]).sqrt();
    [0.5 * (tr - disc), 0.5 * (tr + disc)]
}

fn newton_on_gradient(model: &FieldModel, mut p: Point, tol: f64) -> Option<Point> {
    for _ in 0..NEWTON_MAX_ITER {
        let g = model.grad_b(p.x, p.y);
        if g[0].hypot(g[1]) <= tol {
            return Some(p);
        }
        let hs = model.hess_b(p.x, p.y);
        let ev = sym2_eigenvalues(&hs);
        if ev[0] <= 0.0 {
            return None;
        }
        let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
        let sx = (hs[1][1] * g[0] - hs[0][1] * g[1]) / det;
        let sy = (hs[0][0] * g[1] - hs[1][0] * g[0]) / det;
        let next = Point::new(p.x - sx, p.y - sy);
        if !model.domain.contains(next) {
            return None;
        }
        if next == p {
            // Stagnated at rounding level.
            let g = model.grad_b(p.x, p.y);
            return (g[0].hypot(g[1]) <= tol.max(1e-13)).then_some(p);
        }
        p = next;
    }
    let g = model.grad_b(p.x, p.y);
    (g[0].hypot(g[1]) <= tol).then_some(p)
}

/// Finds the minimum `(x₀, b₀)` of `b` starting from `seed`.
///
/// Newton on `∇b` first; if an iterate leaves the domain box or meets a
/// Hessian that is not positive definite, a coarse grid scan picks a new
/// start and Newton is rerun from there.
pub fn locate_minimum(model: &FieldModel, seed: Point, tol: f64) -> Result<(Point, f64), FieldError> {
    if !model.domain.contains(seed) {
        return Err(FieldError::OutsideDomain { x: seed.x, y: seed.y });
    }
    let found = match newton_on_gradient(model, seed, tol) {
        Some(p) => p,
        None => {
            let start = grid_scan(model)?;
            newton_on_gradient(model, start, tol).ok_or_else(|| {
                let g = model.grad_b(start.x, start.y);
                FieldError::NoInteriorMinimum(format!(
                    "Newton from grid minimum ({:.6}, {:.6}) did not reach |grad b| <= {tol:e} (started at {:e})",
                    start.x,
                    start.y,
                    g[0].hypot(g[1])
                ))
            })?
        }
    };
    let ev = sym2_eigenvalues(&model.hess_b(found.x, found.y));
    let b0 = model.b(found.x, found.y);
    if ev[0] <= 1e-10 * b0.abs().max(1.0) {
        return Err(FieldError::Degenerate { x: found.x, y: found.y, ev });
    }
    if b0 <= 0.0 {
        return Err(FieldError::NonPositiveField(b0));
    }
    Ok((found, b0))
}

fn grid_scan(model: &FieldModel) -> Result<Point, FieldError> {
    let d = model.domain;
    let n = SCAN_POINTS - 1;
    let (mut best, mut bi, mut bj) = (f64::INFINITY, 0, 0);
    for i in 0..=n {
        let x = d.x_min + d.width() * i as f64 / n as f64;
        for j in 0..=n {
            let y = d.y_min + d.height() * j as f64 / n as f64;
            let v = model.b(x, y);
            if v < best {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    if bi == 0 || bi == n || bj == 0 || bj == n {
        return Err(FieldError::NoInteriorMinimum(format!(
            "grid scan minimum b = {best} lies on the domain boundary"
        )));
    }
    Ok(Point::new(
        d.x_min + d.width() * bi as f64 / n as f64,
        d.y_min + d.height() * bj as f64 / n as f64,
    ))
}

/// Constants of the magnetic well at its minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellData {
    pub x0: Point,
    pub b0: f64,
    /// `M = ½ Hess b(x₀)`.
    pub half_hess: [[f64; 2]; 2],
    /// `Tr M^{1/2}`.
    pub a: f64,
    /// `det M`.
    pub d: f64,
    /// Gap between `b₀` and the field level at infinity; `+∞` for confining fields.
    pub eta0: f64,
    /// Width of the energy window `[b₀, b₀ + γ₀]` used by the effective model.
    pub gamma0: f64,
}

impl WellData {
    /// Leading coefficient of consecutive eigenvalue gaps, `2√d / b₀`.
    pub fn gap_coefficient(&self) -> f64 {
        2.0 * self.d.sqrt() / self.b0
    }

    /// `a² / (2b₀)`.
    pub fn ground_coefficient(&self) -> f64 {
        self.a * self.a / (2.0 * self.b0)
    }
}

/// `Tr M^{1/2}` for a symmetric positive 2×2 matrix, in closed form.
pub fn trace_sqrt_2x2(m: &[[f64; 2]; 2]) -> f64 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (m[0][0] + m[1][1] + 2.0 * det.sqrt()).sqrt()
}

/// Builds [`WellData`] at a converged minimum `x0`.
///
/// `eta0` is `+∞` when the boundary infimum of `b` keeps growing as the
/// domain box is doubled twice (a confining polynomial field); otherwise it is
/// the boundary infimum minus `b₀`. `gamma0` defaults to half the boundary gap,
/// capped at `b₀`.
pub fn well_constants(model: &FieldModel, x0: Point) -> Result<WellData, FieldError> {
    let hs = model.hess_b(x0.x, x0.y);
    let half = [[0.5 * hs[0][0], 0.5 * hs[0][1]], [0.5 * hs[1][0], 0.5 * hs[1][1]]];
    let ev = sym2_eigenvalues(&half);
    let b0 = model.b(x0.x, x0.y);
    if ev[0] <= 1e-10 * b0.abs().max(1.0) {
        return Err(FieldError::Degenerate { x: x0.x, y: x0.y, ev: [2.0 * ev[0], 2.0 * ev[1]] });
    }
    if b0 <= 0.0 {
        return Err(FieldError::NonPositiveField(b0));
    }
    let d = half[0][0] * half[1][1] - half[0][1] * half[1][0];
    let a = trace_sqrt_2x2(&half);

    let dom = model.domain;
    let inf1 = model.boundary_infimum(&dom);
    let inf2 = model.boundary_infimum(&dom.scaled(2.0));
    let inf4 = model.boundary_infimum(&dom.scaled(4.0));
    let confining = inf2 > inf1 * (1.0 + 1e-9) && inf4 > inf2 * (1.0 + 1e-9);
    let eta0 = if confining { f64::INFINITY } else { inf1 - b0 };
    let gamma0 = (0.5 * (inf1 - b0)).min(b0);
    Ok(WellData { x0, b0, half_hess: half, a, d, eta0, gamma0 })
}

/// Subtracts `A(0,0) + ∂_yA(0,0)·y` from the potential.
///
/// That subtraction is a gauge change: the field `b` is untouched, and
/// afterwards `A(0,0) = 0` and `∂_yA(0,0) = 0` hold exactly.
pub fn gauge_normalize(model: &FieldModel) -> FieldModel {
    let p = model.potential_poly();
    let c = p.coeff(0, 0);
    let k = p.coeff(0, 1);
    let fixed = p.sub(&Poly2::from_terms([(0, 0, c), (0, 1, k)]));
    FieldModel::from_potential(fixed, model.domain)
}

/// Translates the minimum to the origin and normalizes the gauge.
pub fn normalize_at_minimum(model: &FieldModel, x0: Point) -> FieldModel {
    gauge_normalize(&model.translated(x0))
}
