use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{SolverError, SpectrumResult};
use crate::linalg::CsrMatrix;
use crate::output::write_csv_file;

/// Nonzeros as little-endian `u64 row, u64 col, f64 re, f64 im` records.
pub fn write_triplets(matrix: &CsrMatrix, path: &Path) -> Result<(), SolverError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, j, z) in matrix.triplets() {
        w.write_all(&(i as u64).to_le_bytes())?;
        w.write_all(&(j as u64).to_le_bytes())?;
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_triplets(path: &Path) -> Result<Vec<(usize, usize, Complex64)>, SolverError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 32 != 0 {
        return Err(SolverError::Config(format!("{} is not a whole number of 32-byte records", path.display())));
    }
    let word = |c: &[u8]| <[u8; 8]>::try_from(c).unwrap();
    Ok(bytes
        .chunks_exact(32)
        .map(|r| {
            (
                u64::from_le_bytes(word(&r[0..8])) as usize,
                u64::from_le_bytes(word(&r[8..16])) as usize,
                Complex64::new(f64::from_le_bytes(word(&r[16..24])), f64::from_le_bytes(word(&r[24..32]))),
            )
        })
        .collect())
}

/// Columns `x, y, re, im` for eigenvector `j`.
pub fn write_eigenvector_csv(result: &SpectrumResult, j: usize, path: &Path) -> Result<(), SolverError> {
    let cfg = &result.config;
    let u = result
        .eigenvectors
        .get(j)
        .ok_or_else(|| SolverError::Config(format!("no eigenvector {j}")))?;
    let mut rows = Vec::with_capacity(u.len());
    for i in 0..cfg.n_x {
        for k in 0..cfg.n_y {
            let z = u[cfg.index(i, k)];
            rows.push(vec![cfg.x(i).into(), cfg.y(k).into(), z.re.into(), z.im.into()]);
        }
    }
    write_csv_file(path, &["x", "y", "re", "im"], &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldSpec, Rect};
    use crate::solver2d::{assemble, lowest_eigs, DiscretizationConfig};

    #[test]
    fn triplet_round_trip() {
        let m = FieldSpec::catalog("cross_term").build().unwrap();
        let op = assemble(&m, &DiscretizationConfig::new(Rect::square(1.0), 8, 9, 0.3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.bin");
        write_triplets(&op.matrix, &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 32 * op.matrix.nnz());
        let back = read_triplets(&p).unwrap();
        let again = CsrMatrix::from_triplets(op.dim(), back);
        for (a, b) in op.matrix.triplets().zip(again.triplets()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn eigenvector_csv_has_one_row_per_node() {
        let m = FieldSpec::catalog("isotropic_quadratic").build().unwrap();
        let op = assemble(&m, &DiscretizationConfig::new(Rect::square(1.5), 12, 10, 0.3)).unwrap();
        let r = lowest_eigs(&op, 1, 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        write_eigenvector_csv(&r, 0, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x,y,re,im");
        assert_eq!(text.lines().count(), 121);
    }
}
