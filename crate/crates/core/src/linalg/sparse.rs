//! Compressed sparse row storage for complex Hermitian operators.

use num_complex::Complex64;
use rayon::prelude::*;

use super::banded::HermitianBand;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from `(row, col, value)` triplets; duplicates
    /// are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
            let base = chunk * 1024;
            for (k, yi) in out.iter_mut().enumerate() {
                let i = base + k;
                let mut s = Complex64::new(0.0, 0.0);
                for p in self.indptr[i]..self.indptr[i + 1] {
                    s += self.values[p] * x[self.indices[p]];
                }
                *yi = s;
            }
        });
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij − conj(A_ji)| / max |A_ij|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Lower band copy, assuming the matrix is Hermitian.
    pub fn to_band(&self) -> HermitianBand {
        let mut band = HermitianBand::zeros(self.n, self.bandwidth());
        for (i, j, v) in self.triplets() {
            if i >= j {
                band.add(i, j, v);
            }
        }
        band
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).re).collect()
    }
}
