//! Bivariate polynomials with exact differentiation.
//!
//! Magnetic potentials are stored as polynomials so that the field
//! `b = ∂A/∂x`, its gradient and Hessian, and the line integrals of `A`
//! used for Peierls phases are all computed in closed form.

use std::collections::BTreeMap;
use std::fmt;

/// A polynomial `Σ c_ij x^i y^j` stored as a sparse, sorted term list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly2::from_terms([(0, 0, c)])
    }

    /// Builds a polynomial from `(x power, y power, coefficient)` triples.
    /// Repeated monomials are summed and zero coefficients dropped.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, f64)>,
    {
        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (i, j, c) in terms {
            *acc.entry((i, j)).or_insert(0.0) += c;
        }
        Poly2 {
            terms: acc
                .into_iter()
                .filter(|&(_, c)| c != 0.0)
                .map(|((i, j), c)| (i, j, c))
                .collect(),
        }
    }

    pub fn terms(&self) -> &[(u32, u32, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `x^i y^j`.
    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms
            .iter()
            .find(|&&(a, b, _)| a == i && b == j)
            .map_or(0.0, |t| t.2)
    }

    pub fn degree_x(&self) -> u32 {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }

    pub fn degree_y(&self) -> u32 {
        self.terms.iter().map(|t| t.1).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for &(i, j, c) in &self.terms {
            s += c * x.powi(i as i32) * y.powi(j as i32);
        }
        s
    }

    pub fn dx(&self) -> Self {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64)),
        )
    }

    pub fn dy(&self) -> Self {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64)),
        )
    }

    /// Antiderivative in `y` with zero constant of integration.
    pub fn integrate_y(&self) -> Self {
        Poly2::from_terms(
            self.terms
                .iter()
                .map(|&(i, j, c)| (i, j + 1, c / (j + 1) as f64)),
        )
    }

    /// Antiderivative in `x` with zero constant of integration.
    pub fn integrate_x(&self) -> Self {
        Poly2::from_terms(
            self.terms
                .iter()
                .map(|&(i, j, c)| (i + 1, j, c / (i + 1) as f64)),
        )
    }

    /// `∫_{y0}^{y1} p(x, y) dy` evaluated exactly.
    pub fn line_integral_y(&self, x: f64, y0: f64, y1: f64) -> f64 {
        let mut s = 0.0;
        for &(i, j, c) in &self.terms {
            let k = (j + 1) as i32;
            s += c * x.powi(i as i32) * (y1.powi(k) - y0.powi(k)) / k as f64;
        }
        s
    }

    /// The polynomial `q(x, y) = p(x + dx, y + dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        let mut out = Vec::new();
        for &(i, j, c) in &self.terms {
            for a in 0..=i {
                let cx = binomial(i, a) * dx.powi((i - a) as i32);
                for b in 0..=j {
                    let cy = binomial(j, b) * dy.powi((j - b) as i32);
                    out.push((a, b, c * cx * cy));
                }
            }
        }
        Poly2::from_terms(out)
    }

    pub fn add(&self, other: &Poly2) -> Self {
        Poly2::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn scale(&self, s: f64) -> Self {
        Poly2::from_terms(self.terms.iter().map(|&(i, j, c)| (i, j, c * s)))
    }

    pub fn sub(&self, other: &Poly2) -> Self {
        self.add(&other.scale(-1.0))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for t in 0..k {
        r *= (n - t) as f64 / (t + 1) as f64;
    }
    r
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, &(i, j, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            match i {
                0 => {}
                1 => write!(f, "·x")?,
                _ => write!(f, "·x^{i}")?,
            }
            match j {
                0 => {}
                1 => write!(f, "·y")?,
                _ => write!(f, "·y^{j}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Poly2 {
        // x + x^3/3 + x y^2
        Poly2::from_terms([(1, 0, 1.0), (3, 0, 1.0 / 3.0), (1, 2, 1.0)])
    }

    #[test]
    fn derivatives_are_exact() {
        let a = sample();
        let b = a.dx();
        assert_eq!(b, Poly2::from_terms([(0, 0, 1.0), (2, 0, 1.0), (0, 2, 1.0)]));
        assert_eq!(a.dy(), Poly2::from_terms([(1, 1, 2.0)]));
        assert_eq!(b.eval(1.0, 1.0), 3.0);
    }

    #[test]
    fn merges_and_drops_zero_terms() {
        let p = Poly2::from_terms([(1, 0, 1.0), (1, 0, -1.0), (0, 1, 2.0), (0, 1, 1.0)]);
        assert_eq!(p.terms(), &[(0, 1, 3.0)]);
    }

    #[test]
    fn line_integral_matches_antiderivative() {
        let a = sample();
        let prim = a.integrate_y();
        let (x, y0, y1) = (0.7, -0.3, 1.1);
        let lhs = a.line_integral_y(x, y0, y1);
        let rhs = prim.eval(x, y1) - prim.eval(x, y0);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(Poly2::from_terms([(1, 2, 2.0)]).to_string(), "2·x·y^2");
        assert_eq!(Poly2::zero().to_string(), "0");
    }

    proptest! {
        #[test]
        fn shift_agrees_with_evaluation(
            dx in -2.0f64..2.0, dy in -2.0f64..2.0,
            x in -1.5f64..1.5, y in -1.5f64..1.5,
        ) {
            let p = sample().add(&Poly2::from_terms([(2, 3, 0.25), (0, 1, -1.5)]));
            let q = p.shifted(dx, dy);
            let want = p.eval(x + dx, y + dy);
            prop_assert!((q.eval(x, y) - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }

        #[test]
        fn integrate_then_differentiate_is_identity(c in -3.0f64..3.0, i in 0u32..4, j in 0u32..4) {
            let p = Poly2::from_terms([(i, j, c), (1, 1, 0.5)]);
            let back = p.integrate_x().dx();
            for (a, b) in back.terms().iter().zip(p.terms()) {
                prop_assert_eq!((a.0, a.1), (b.0, b.1));
                prop_assert!((a.2 - b.2).abs() < 1e-14);
            }
        }
    }
}
