//! Thin wrappers over the LAPACK eigen-solvers.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigVals};
use num_complex::Complex64 as C64;

use crate::error::Result;

/// Right eigenpairs of a general complex matrix, sorted by ascending real
/// part. Eigenvectors are the columns of the returned matrix, each with unit
/// 2-norm.
pub fn eig_sorted(m: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let (vals, vecs) = m.eig()?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].re.total_cmp(&vals[j].re));
    let n = m.nrows();
    let mut out = Array2::<C64>::zeros((n, vals.len()));
    let mut sorted = Vec::with_capacity(vals.len());
    for (c, &i) in order.iter().enumerate() {
        sorted.push(vals[i]);
        let col = vecs.column(i);
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            out[[r, c]] = col[r] / nrm;
        }
    }
    Ok((sorted, out))
}

/// Eigenvalues only, sorted by ascending real part.
pub fn eigvals_sorted(m: &Array2<C64>) -> Result<Vec<C64>> {
    let vals: Array1<C64> = m.eigvals()?;
    let mut v = vals.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(v)
}

/// Largest `|M - M^dagger|` entry.
pub fn hermitian_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Anti-Hermitian part expressed as the Hermitian matrix `(M - M^dagger)/(2i)`.
pub fn imaginary_part(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        (m[[i, j]] - m[[j, i]].conj()) / C64::new(0.0, 2.0)
    })
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_hermitian_eigenvalue(h: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let w = h.eigvalsh(UPLO::Lower)?;
    Ok(w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}
