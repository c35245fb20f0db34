//! Dense complex linear algebra shared by every module.
//!
//! Everything here works on `DMatrix<Complex<f64>>`. Hermitian inputs are
//! symmetrized before factorization so that round-off in the caller never
//! leaks into an eigen- or Cholesky decomposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const LN_2: f64 = std::f64::consts::LN_2;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real diagonal matrix as a complex matrix.
pub fn diag_real(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (k, &v) in values.iter().enumerate() {
        m[(k, k)] = c(v, 0.0);
    }
    m
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|k| a[(k, k)].re).sum()
}

/// Block-diagonal concatenation.
pub fn blkdiag(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks must share a column count.
pub fn vstack(blocks: &[&CMatrix]) -> Result<CMatrix> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::Domain("vstack: column counts differ".into()));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

fn cholesky(a: &CMatrix, what: &str) -> Result<Cholesky<C64, Dyn>> {
    if !a.is_square() {
        return Err(Error::Domain(format!("{what}: matrix is not square")));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite entries")));
    }
    let not_pd = || Error::Numerical(format!("{what}: matrix is not positive definite"));
    let chol = Cholesky::new(hermitian_part(a)).ok_or_else(not_pd)?;
    // The complex factorization takes square roots of negative pivots
    // instead of failing, so the pivots are checked here.
    let l = chol.l_dirty();
    let pivots_ok = (0..a.nrows()).all(|k| {
        let d = l[(k, k)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if pivots_ok {
        Ok(chol)
    } else {
        Err(not_pd())
    }
}

/// `log2 det(A)` for Hermitian positive definite `A`, via Cholesky.
pub fn log2_det_hpd(a: &CMatrix) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = cholesky(a, "log-det")?;
    let l = chol.l_dirty();
    let ln: f64 = (0..a.nrows()).map(|k| l[(k, k)].re.ln()).sum();
    Ok(2.0 * ln / LN_2)
}

/// Lower-triangular `L` with `A = L L^H`.
pub fn cholesky_factor(a: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a, "Cholesky factor")?.unpack())
}

/// Solves `L X = B` for lower-triangular `L` with nonzero diagonal.
pub fn solve_lower(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a, "HPD solve")?.solve(b))
}

pub fn inverse_hpd(a: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a, "HPD inverse")?.inverse())
}

/// Returns an error unless `A` is Hermitian positive definite.
pub fn require_hpd(a: &CMatrix, what: &str) -> Result<()> {
    cholesky(a, what).map(|_| ())
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back in descending order (stable for ties). Each
/// eigenvector is rotated so that its largest-magnitude entry is real and
/// positive, which pins down the otherwise arbitrary phase.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Domain("eigen: matrix is not square".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("eigen: non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(hermitian_part(a), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigen: QR iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 1..n {
            if col[r].norm() > col[pivot].norm() * (1.0 + 1e-12) {
                pivot = r;
            }
        }
        let p = col[pivot];
        let phase = if p.norm() > 0.0 {
            p.conj() / p.norm()
        } else {
            c(1.0, 0.0)
        };
        for r in 0..n {
            vectors[(r, dst)] = col[r] * phase;
        }
    }
    Ok((values, vectors))
}

/// `V diag(f(lambda)) V^H` for a Hermitian matrix given its eigenpairs.
pub fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let s = f(v);
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    &scaled * vectors.adjoint()
}

/// Hermitian square root `A^{1/2}` and inverse square root `A^{-1/2}` of an
/// HPD matrix.
pub fn hpd_sqrt_pair(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (values, vectors) = hermitian_eigen(a)?;
    let max = values.first().copied().unwrap_or(0.0);
    let min = values.last().copied().unwrap_or(0.0);
    if !(min > 0.0) || min <= max * 1e-15 {
        return Err(Error::Domain(format!(
            "matrix is not positive definite (eigenvalue range [{min:e}, {max:e}])"
        )));
    }
    Ok((
        spectral_map(&values, &vectors, f64::sqrt),
        spectral_map(&values, &vectors, |v| 1.0 / v.sqrt()),
    ))
}

/// Hermitian square root of a PSD matrix.
///
/// Eigenvalues below `-1e-10 * trace` are rejected; the rest of the
/// nonpositive or negligible spectrum (below `1e-12 * trace`) is treated as
/// exactly zero so that rank-deficient inputs keep their null space.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(a)?;
    let tr = trace_re(a).abs();
    if let Some(&min) = values.last() {
        if min < -1e-10 * tr {
            return Err(Error::Domain(format!(
                "covariance is not PSD (eigenvalue {min:e}, trace {tr:e})"
            )));
        }
    }
    let cutoff = 1e-12 * tr;
    Ok(spectral_map(&values, &vectors, |v| {
        if v > cutoff {
            v.sqrt()
        } else {
            0.0
        }
    }))
}
