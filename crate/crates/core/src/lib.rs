//! Low-lying spectra of the two-dimensional magnetic Schrödinger operator
//!
//! ```text
//! H^h = h² D_x² + (h D_y + A(x, y))²
//! ```
//!
//! with a single non-degenerate magnetic well, by four routes: the two-term
//! semiclassical expansion ([`asymptotics`]), Bohr–Sommerfeld and direct
//! quantization of the effective symbol ([`effective`]), and a finite
//! difference solve of the full operator ([`solver2d`]). [`harness`] runs
//! them side by side over a range of `h`.
//!
//! ```
//! use magspec::asymptotics::predict_lambda;
//! use magspec::field::{well_constants, FieldSpec, Point};
//!
//! let model = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
//! let well = well_constants(&model, Point::ORIGIN).unwrap();
//! let p = predict_lambda(&well, 0, 0.1, 1.0);
//! assert!((p.value - 0.12).abs() < 1e-15);
//! ```

// `!(x > 0.0)` is how NaN gets rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod effective;
pub mod field;
pub mod harness;
pub mod linalg;
pub mod oscillator;
pub mod output;
pub mod poly;
pub mod quadrature;
pub mod solver2d;
pub mod stencil;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/predictions.md")]
    mod predictions {}
    #[doc = include_str!("../../../book/src/effective.md")]
    mod effective {}
    #[doc = include_str!("../../../book/src/oscillator.md")]
    mod oscillator {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
