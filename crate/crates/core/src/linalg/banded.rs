//! Hermitian band matrices and their `LDLᴴ` factorization.
//!
//! The factorization is done without pivoting. For a positive definite
//! matrix (the shift-invert case) this is Cholesky in disguise and is
//! stable; for an indefinite shift it still yields the inertia by
//! Sylvester's law, which is what spectrum slicing needs.

use num_complex::Complex64;

use super::LinalgError;

/// Lower band of a Hermitian matrix, stored column by column:
/// `data[j * (bw + 1) + k] = A[j + k][j]`.
#[derive(Clone, Debug)]
pub struct HermitianBand {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl HermitianBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        HermitianBand { n, bw, data: vec![Complex64::new(0.0, 0.0); n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Bytes taken by the band (and by its factor, which has the same shape).
    pub fn storage_bytes(n: usize, bw: usize) -> usize {
        n * (bw + 1) * std::mem::size_of::<Complex64>()
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        j * (self.bw + 1) + (i - j)
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are folded onto
    /// their conjugate position. The diagonal keeps only the real part.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        if i >= j {
            assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
            let s = self.slot(i, j);
            if i == j {
                self.data[s] += Complex64::new(v.re, 0.0);
            } else {
                self.data[s] += v;
            }
        } else {
            self.add(j, i, v.conj());
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            if i - j > self.bw {
                return Complex64::new(0.0, 0.0);
            }
            self.data[self.slot(i, j)]
        } else {
            self.get(j, i).conj()
        }
    }

    /// `A − σI`.
    pub fn shifted(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.n {
            let s = out.slot(j, j);
            out.data[s] -= sigma;
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let w = self.bw + 1;
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for j in 0..self.n {
            let col = &self.data[j * w..(j + 1) * w];
            y[j] += col[0] * x[j];
            for k in 1..w.min(self.n - j) {
                let a = col[k];
                y[j + k] += a * x[j];
                y[j] += a.conj() * x[j + k];
            }
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.n];
        let w = self.bw + 1;
        for j in 0..self.n {
            for k in 1..w.min(self.n - j) {
                let a = self.data[j * w + k].norm();
                radius[j] += a;
                radius[j + k] += a;
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..self.n {
            let d = self.data[j * w].re;
            lo = lo.min(d - radius[j]);
            hi = hi.max(d + radius[j]);
        }
        (lo, hi)
    }

    /// `A = L D Lᴴ` with unit lower-triangular band `L` and real diagonal `D`.
    pub fn ldl(&self) -> Result<BandLdl, LinalgError> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut data = self.data.clone();
        let mut d = vec![0.0; n];
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for j in 0..n {
            let (head, tail) = data.split_at_mut((j + 1) * w);
            let col = &mut head[j * w..];
            let dj = col[0].re;
            if dj.abs() <= 1e-300_f64.max(scale * 1e-15 * f64::EPSILON) || !dj.is_finite() {
                return Err(LinalgError::ZeroPivot { index: j, value: dj });
            }
            d[j] = dj;
            let kmax = bw.min(n - 1 - j);
            for k2 in 1..=kmax {
                let cl = col[k2].conj() / dj;
                if cl.re == 0.0 && cl.im == 0.0 {
                    continue;
                }
                let target = &mut tail[(k2 - 1) * w..(k2 - 1) * w + (kmax - k2 + 1)];
                for (t, c) in target.iter_mut().zip(&col[k2..=kmax]) {
                    *t -= c * cl;
                }
            }
            let inv = 1.0 / dj;
            for c in &mut col[1..=kmax] {
                *c *= inv;
            }
            col[0] = Complex64::new(1.0, 0.0);
        }
        Ok(BandLdl { n, bw, l: data, d })
    }
}

/// Factor produced by [`HermitianBand::ldl`].
#[derive(Clone, Debug)]
pub struct BandLdl {
    n: usize,
    bw: usize,
    l: Vec<Complex64>,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Number of negative pivots, i.e. eigenvalues below the shift.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Overwrites `x` with `A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let w = self.bw + 1;
        let n = self.n;
        for j in 0..n {
            let xj = x[j];
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            let kmax = self.bw.min(n - 1 - j);
            let col = &self.l[j * w + 1..j * w + 1 + kmax];
            for (xi, l) in x[j + 1..=j + kmax].iter_mut().zip(col) {
                *xi -= l * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= *dj;
        }
        for j in (0..n).rev() {
            let kmax = self.bw.min(n - 1 - j);
            let col = &self.l[j * w + 1..j * w + 1 + kmax];
            let mut s = Complex64::new(0.0, 0.0);
            for (xi, l) in x[j + 1..=j + kmax].iter().zip(col) {
                s += l.conj() * xi;
            }
            x[j] -= s;
        }
    }
}

/// Eigenvalues of a Hermitian band matrix by bisection on the inertia of
/// `A − σI`, returning the `count` smallest ones to absolute accuracy `tol`.
pub fn lowest_eigenvalues_bisection(a: &HermitianBand, count: usize, tol: f64) -> Result<Vec<f64>, LinalgError> {
    let (glo, ghi) = a.gershgorin();
    let inertia = |sigma: f64| -> Result<usize, LinalgError> {
        let mut s = sigma;
        for attempt in 0..4 {
            match a.shifted(s).ldl() {
                Ok(f) => return Ok(f.negative_count()),
                Err(e) if attempt == 3 => return Err(e),
                Err(_) => s += tol.max(f64::EPSILON * s.abs()) * 0.01,
            }
        }
        unreachable!()
    };
    let mut out = Vec::with_capacity(count);
    let mut lo = glo;
    for k in 0..count.min(a.dim()) {
        // Find the (k+1)-th eigenvalue: smallest σ with count(σ) ≥ k + 1.
        let mut l = lo;
        let mut r = ghi;
        while r - l > tol {
            let mid = 0.5 * (l + r);
            if inertia(mid)? > k {
                r = mid;
            } else {
                l = mid;
            }
        }
        let ev = 0.5 * (l + r);
        out.push(ev);
        lo = l;
    }
    Ok(out)
}
