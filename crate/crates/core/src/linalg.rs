//! Small dense complex linear algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout.
pub type CMat = DMatrix<C64>;
/// Dense complex vector.
pub type CVec = DVector<C64>;

/// Max-norm deviation of `m` from its own adjoint, relative to the largest entry.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev / scale
}

/// Max-norm of U†U − I.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((p[(i, j)] - target).norm());
        }
    }
    dev
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending,
/// eigenvectors as matrix columns. Fails if `m` is not Hermitian to `tol`.
pub fn eigh(m: &CMat, tol: f64) -> Result<(DVector<f64>, CMat)> {
    let dev = hermiticity_deviation(m);
    if dev >= tol {
        return Err(Error::NotHermitian { dev, tol });
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// exp(−i·H·scale) for Hermitian `H`, via eigendecomposition.
///
/// `scale` carries the dt/ħ factor so `H` can stay in joules.
pub fn expm_hermitian(h: &CMat, scale: f64, herm_tol: f64) -> Result<CMat> {
    let (values, vectors) = eigh(h, herm_tol)?;
    Ok(unitary_from_eigh(&values, &vectors, scale))
}

/// Assemble exp(−i·λ·scale) from a precomputed eigendecomposition.
pub fn unitary_from_eigh(values: &DVector<f64>, vectors: &CMat, scale: f64) -> CMat {
    let n = values.len();
    let mut phased = vectors.clone();
    for j in 0..n {
        let phase = C64::from_polar(1.0, -values[j] * scale);
        for i in 0..n {
            phased[(i, j)] *= phase;
        }
    }
    phased * vectors.adjoint()
}

/// tr(A† B).
pub fn trace_adjoint_product(a: &CMat, b: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}
