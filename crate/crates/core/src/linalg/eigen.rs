//! Lowest eigenpairs of large sparse Hermitian matrices.
//!
//! The main path is a restarted block Krylov method on the shift-inverted
//! operator `(H − σ)⁻¹`, with Rayleigh–Ritz done on `H` itself. The block
//! size exceeds the number of wanted pairs so exact degeneracies are
//! resolved. A Jacobi-preconditioned LOBPCG is kept for
//! matrices whose band factor would not fit the memory budget.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{banded::BandLdl, dot, hermitian_eigh, norm, sparse::CsrMatrix, zero, LinalgError};

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Stop when `‖Hv − λv‖ ≤ tol·|λ|` for every wanted pair.
    pub tol: f64,
    /// Block size; at least the number of wanted pairs plus two.
    pub block: Option<usize>,
    /// Largest Krylov basis before a restart.
    pub basis: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, block: None, basis: None, max_restarts: 200, seed: 0x5eed }
    }
}

/// Eigenpairs with unit Euclidean norm and absolute residual norms.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn random_block(n: usize, p: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect())
        .collect()
}

/// Orthonormalizes `w` against `basis` by repeated Gram–Schmidt, stopping
/// once a pass no longer shrinks the vector by more than half. Returns
/// `None` when `w` is numerically inside the span.
fn orthonormalize_against(basis: &[Vec<Complex64>], mut w: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n0 = norm(&w);
    if n0 == 0.0 {
        return None;
    }
    let mut before = n0;
    for _ in 0..6 {
        let coeffs: Vec<Complex64> = basis.par_iter().map(|q| dot(q, &w)).collect();
        for (q, c) in basis.iter().zip(&coeffs) {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        let after = norm(&w);
        if after <= 1e-13 * n0 {
            return None;
        }
        if after > 0.5 * before {
            w.iter_mut().for_each(|v| *v /= after);
            return Some(w);
        }
        before = after;
    }
    None
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
    residuals: Vec<f64>,
}

/// Rayleigh–Ritz of `h` on the orthonormal `basis`, keeping `keep` pairs.
fn rayleigh_ritz(h: &CsrMatrix, basis: &[Vec<Complex64>], keep: usize) -> Ritz {
    let n = h.dim();
    let k = basis.len();
    let hq: Vec<Vec<Complex64>> = basis
        .iter()
        .map(|q| {
            let mut y = vec![zero(); n];
            h.matvec(q, &mut y);
            y
        })
        .collect();
    let entries: Vec<Complex64> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            if j < i {
                zero()
            } else {
                dot(&basis[i], &hq[j])
            }
        })
        .collect();
    let g = DMatrix::from_fn(k, k, |i, j| if j >= i { entries[i * k + j] } else { entries[j * k + i].conj() });
    let (theta, y) = hermitian_eigh(g);
    let keep = keep.min(k);
    let pairs: Vec<(Vec<Complex64>, f64)> = (0..keep)
        .into_par_iter()
        .map(|c| {
            let mut u = vec![zero(); n];
            let mut hu = vec![zero(); n];
            for i in 0..k {
                let yi = y[(i, c)];
                for ((ur, hur), (q, hqv)) in u.iter_mut().zip(hu.iter_mut()).zip(basis[i].iter().zip(&hq[i])) {
                    *ur += yi * q;
                    *hur += yi * hqv;
                }
            }
            let nu = norm(&u);
            u.iter_mut().for_each(|v| *v /= nu);
            hu.iter_mut().for_each(|v| *v /= nu);
            let r = hu.iter().zip(&u).map(|(a, b)| (a - theta[c] * b).norm_sqr()).sum::<f64>().sqrt();
            (u, r)
        })
        .collect();
    let (vectors, residuals) = pairs.into_iter().unzip();
    Ritz { values: theta[..keep].to_vec(), vectors, residuals }
}

fn converged(r: &Ritz, m: usize, tol: f64) -> bool {
    (0..m).all(|i| r.residuals[i] <= tol * r.values[i].abs().max(f64::MIN_POSITIVE))
}

fn worst_relative(r: &Ritz, m: usize) -> (f64, Vec<f64>) {
    let rel: Vec<f64> = (0..m.min(r.values.len()))
        .map(|i| r.residuals[i] / r.values[i].abs().max(f64::MIN_POSITIVE))
        .collect();
    (rel.iter().copied().fold(0.0, f64::max), rel)
}

/// The `m` smallest eigenpairs of `h`, given an `LDLᴴ` factor of `h − σ`
/// with `σ` below the wanted part of the spectrum.
pub fn shift_invert_lowest(
    h: &CsrMatrix,
    factor: &BandLdl,
    m: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs, LinalgError> {
    let n = h.dim();
    if m == 0 || m > n {
        return Err(LinalgError::TooManyPairs { requested: m, dim: n });
    }
    let p = opts.block.unwrap_or(m + 2).max(m).min(n);
    let kmax = opts.basis.unwrap_or((4 * m).max(40)).max(2 * p).min(n);
    let mut start = random_block(n, p, opts.seed);
    let mut last: Option<Ritz> = None;
    for restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(kmax);
        let mut frontier = Vec::new();
        for v in start.drain(..) {
            if let Some(q) = orthonormalize_against(&basis, v) {
                basis.push(q.clone());
                frontier.push(q);
            }
        }
        while basis.len() < kmax && !frontier.is_empty() {
            let images: Vec<Vec<Complex64>> = frontier
                .par_iter()
                .map(|q| {
                    let mut w = q.clone();
                    factor.solve_in_place(&mut w);
                    w
                })
                .collect();
            frontier.clear();
            for w in images {
                if basis.len() >= kmax {
                    break;
                }
                if let Some(q) = orthonormalize_against(&basis, w) {
                    basis.push(q.clone());
                    frontier.push(q);
                }
            }
        }
        let ritz = rayleigh_ritz(h, &basis, p.max(m));
        if converged(&ritz, m, opts.tol) {
            return Ok(EigenPairs {
                values: ritz.values[..m].to_vec(),
                vectors: ritz.vectors[..m].to_vec(),
                residuals: ritz.residuals[..m].to_vec(),
                iterations: restart + 1,
            });
        }
        start = ritz.vectors.clone();
        last = Some(ritz);
    }
    let ritz = last.expect("at least one restart");
    let (worst, residuals) = worst_relative(&ritz, m);
    Err(LinalgError::NotConverged { iterations: opts.max_restarts, worst_residual: worst, residuals })
}

/// LOBPCG with a Jacobi preconditioner `(diag H − θ_min/2)⁻¹`; slow on
/// stiff problems but needs only matrix–vector products.
pub fn lobpcg_lowest(h: &CsrMatrix, m: usize, opts: &EigenOptions, max_iter: usize) -> Result<EigenPairs, LinalgError> {
    let n = h.dim();
    if m == 0 || m > n {
        return Err(LinalgError::TooManyPairs { requested: m, dim: n });
    }
    let p = opts.block.unwrap_or(m + 2).max(m).min(n);
    let diag = h.diagonal();
    let mut x: Vec<Vec<Complex64>> = Vec::new();
    for v in random_block(n, p, opts.seed) {
        if let Some(q) = orthonormalize_against(&x, v) {
            x.push(q);
        }
    }
    let mut ritz = rayleigh_ritz(h, &x, p);
    let mut prev_dirs: Vec<Vec<Complex64>> = Vec::new();
    for it in 0..max_iter {
        if converged(&ritz, m, opts.tol) {
            return Ok(EigenPairs {
                values: ritz.values[..m].to_vec(),
                vectors: ritz.vectors[..m].to_vec(),
                residuals: ritz.residuals[..m].to_vec(),
                iterations: it,
            });
        }
        let shift = 0.5 * ritz.values[0];
        let w: Vec<Vec<Complex64>> = ritz
            .vectors
            .par_iter()
            .zip(&ritz.values)
            .map(|(u, &th)| {
                let mut hu = vec![zero(); n];
                h.matvec(u, &mut hu);
                hu.iter()
                    .zip(u)
                    .zip(&diag)
                    .map(|((a, b), d)| (a - th * b) / (d - shift).max(1e-300))
                    .collect()
            })
            .collect();
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for v in ritz.vectors.iter().cloned().chain(w).chain(prev_dirs.iter().cloned()) {
            if let Some(q) = orthonormalize_against(&basis, v) {
                basis.push(q);
            }
        }
        let next = rayleigh_ritz(h, &basis, p);
        prev_dirs = next
            .vectors
            .iter()
            .filter_map(|v| {
                let mut d = v.clone();
                for u in &ritz.vectors {
                    let c = dot(u, &d);
                    d.iter_mut().zip(u).for_each(|(di, ui)| *di -= c * ui);
                }
                (norm(&d) > 1e-12).then_some(d)
            })
            .collect();
        ritz = next;
    }
    let (worst, residuals) = worst_relative(&ritz, m);
    Err(LinalgError::NotConverged { iterations: max_iter, worst_residual: worst, residuals })
}
