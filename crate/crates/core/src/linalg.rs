//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for channels, beamformers and projectors.
pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Columns of `m` in the given order.
pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Rows of `m` in the given order.
pub fn select_rows(m: &CMat, rows: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// `m * diag(d)`.
pub fn scale_columns(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[c])
}

/// `diag(d) * m`.
pub fn scale_rows(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[r])
}

/// Largest entrywise deviation of `a` from its conjugate transpose.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(a + a^H) / 2`.
pub fn symmetrize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Thin QR factorization `a = q r` with `r` upper triangular and a real,
/// nonnegative diagonal. Requires `a.nrows() >= a.ncols()`.
pub fn qr_positive(a: &CMat) -> (CMat, CMat) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            // q r = (q phase) (conj(phase) r)
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
            let cp = phase.conj();
            for c in 0..r.ncols() {
                r[(j, c)] *= cp;
            }
            r[(j, j)] = Complex64::new(r[(j, j)].re, 0.0);
        }
    }
    (q, r)
}

/// Log-determinant of a Hermitian positive definite matrix via Cholesky.
/// Returns `None` when the factorization breaks down.
pub fn hermitian_logdet(a: &CMat) -> Option<f64> {
    let n = a.nrows();
    // Hand-rolled Cholesky: the matrices here are tiny and this sits on the
    // Monte Carlo hot path.
    let mut l = vec![ZERO; n * n];
    let mut logdet = 0.0;
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for p in 0..j {
            diag -= l[j * n + p].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        logdet += 2.0 * ljj.ln();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(logdet)
}

/// Trace of the inverse of a Hermitian positive definite matrix.
pub fn hermitian_inverse_trace(a: &CMat) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let n = a.nrows();
    let linv = chol.l().solve_lower_triangular(&identity(n))?;
    let t = linv.norm_squared();
    t.is_finite().then_some(t)
}

/// Eigenvalues (ascending order not guaranteed) of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    a.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// Real log-determinant of a Hermitian positive semi-definite matrix from its
/// spectrum; `-inf` when singular.
pub fn hermitian_psd_logdet(a: &CMat) -> f64 {
    if let Some(v) = hermitian_logdet(a) {
        return v;
    }
    hermitian_eigenvalues(a)
        .into_iter()
        .map(|l| if l > 0.0 { l.ln() } else { f64::NEG_INFINITY })
        .sum()
}

/// Principal square root of a Hermitian PSD matrix, negative eigenvalues
/// clamped to zero.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let dev = hermitian_deviation(a);
    let scale = a.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let eig = symmetrize(a).symmetric_eigen();
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (&v * v.adjoint()) * Complex64::new(s, 0.0);
    }
    Ok(symmetrize(&out))
}

/// Determinant of a small square matrix by partial-pivot LU.
pub fn det(a: &CMat) -> Complex64 {
    a.clone().lu().determinant()
}

/// Frobenius distance between the orthogonal projectors onto the column
/// spans of two semi-unitary matrices.
pub fn projector_distance(a: &CMat, b: &CMat) -> f64 {
    (a * a.adjoint() - b * b.adjoint()).norm()
}

/// Extreme singular values `(min, max)`.
pub fn singular_value_range(a: &CMat) -> (f64, f64) {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

pub fn is_semi_unitary(a: &CMat, tol: f64) -> bool {
    a.nrows() >= a.ncols() && (a.adjoint() * a - identity(a.ncols())).norm() <= tol
}
