use crate::error::{Error, Result};
use crate::linalg::{blkdiag, hermitian_part, solve_hpd, vstack, CMatrix};

use super::SideInfo;

/// Combining matrices of one AP: `U` acts on the local antennas, `V` on the
/// incoming fronthaul signal (absent at the head of a stripe).
#[derive(Clone, Debug, PartialEq)]
pub struct Combiners {
    pub u: CMatrix,
    pub v: Option<CMatrix>,
}

/// Linear MMSE estimator of `x` from the stacked input `[y; r_prev]`.
///
/// `A = (B Sx B^H + Sw~)^{-1} B Sx` with `B = [H_hat; G_prev]` and
/// `Sw~ = blkdiag(Sigma_w, Sigma_e_prev)`; `U` is the first N rows of `A`
/// and `V` the last K.
pub fn mmse_combiners(
    h_hat: &CMatrix,
    sigma_w: &CMatrix,
    prev: Option<&SideInfo>,
    sigma_x: &CMatrix,
) -> Result<Combiners> {
    let n = h_hat.nrows();
    let (b, noise) = match prev {
        None => (h_hat.clone(), sigma_w.clone()),
        Some(si) => (
            vstack(&[h_hat, &si.g_hat])?,
            blkdiag(&[sigma_w, &si.sigma_e]),
        ),
    };
    let b_sx = &b * sigma_x;
    let system = hermitian_part(&(&b_sx * b.adjoint() + noise));
    let a = solve_hpd(&system, &b_sx)
        .map_err(|e| Error::Numerical(format!("MMSE combiner system: {e}")))?;
    let u = a.rows(0, n).into_owned();
    let v = prev.map(|_| a.rows(n, a.nrows() - n).into_owned());
    Ok(Combiners { u, v })
}

/// `G_i = U^H H_hat + V^H G_{i-1}`.
pub fn update_effective_channel(
    u: &CMatrix,
    v: Option<&CMatrix>,
    h_hat: &CMatrix,
    prev: Option<&SideInfo>,
) -> Result<CMatrix> {
    let mut g = u.adjoint() * h_hat;
    match (v, prev) {
        (Some(v), Some(si)) => g += v.adjoint() * &si.g_hat,
        (None, None) => {}
        _ => {
            return Err(Error::Domain(
                "V and the incoming side information must come together".into(),
            ))
        }
    }
    Ok(g)
}

/// `Sigma_n = U^H Sigma_w U + V^H Sigma_e_prev V`.
///
/// Only positive semidefinite when the combiners lack column rank (e.g.
/// `K > N` at the head of a stripe); the quantizer design handles that.
pub fn update_noise_cov(
    u: &CMatrix,
    v: Option<&CMatrix>,
    sigma_w: &CMatrix,
    prev: Option<&SideInfo>,
) -> Result<CMatrix> {
    let mut sn = u.adjoint() * sigma_w * u;
    match (v, prev) {
        (Some(v), Some(si)) => sn += v.adjoint() * &si.sigma_e * v,
        (None, None) => {}
        _ => {
            return Err(Error::Domain(
                "V and the incoming side information must come together".into(),
            ))
        }
    }
    Ok(hermitian_part(&sn))
}

/// MMSE choice of `V` when `U` is fixed elsewhere (e.g. by a hybrid
/// analog/digital factorization):
/// `V = (G Sx G^H + Sigma_e)^{-1} G Sx (I - H_hat^H U)`.
///
/// For the jointly optimal `U` this returns the `V` of [`mmse_combiners`].
pub fn conditional_mmse_v(
    u: &CMatrix,
    h_hat: &CMatrix,
    prev: &SideInfo,
    sigma_x: &CMatrix,
) -> Result<CMatrix> {
    let g = &prev.g_hat;
    let k = sigma_x.nrows();
    let system = hermitian_part(&(g * sigma_x * g.adjoint() + &prev.sigma_e));
    let rhs = g * sigma_x * (CMatrix::identity(k, k) - h_hat.adjoint() * u);
    solve_hpd(&system, &rhs)
}

/// Trace MSE `E||x - A^H y~||^2` of a combiner `A = [U; V]` on the stacked
/// model `y~ = B x + w~`.
pub fn combiner_mse(
    combiners: &Combiners,
    h_hat: &CMatrix,
    sigma_w: &CMatrix,
    prev: Option<&SideInfo>,
    sigma_x: &CMatrix,
) -> Result<f64> {
    let (a, b, noise) = match (prev, &combiners.v) {
        (None, None) => (combiners.u.clone(), h_hat.clone(), sigma_w.clone()),
        (Some(si), Some(v)) => (
            vstack(&[&combiners.u, v])?,
            vstack(&[h_hat, &si.g_hat])?,
            blkdiag(&[sigma_w, &si.sigma_e]),
        ),
        _ => {
            return Err(Error::Domain(
                "V and the incoming side information must come together".into(),
            ))
        }
    };
    let ah_b = a.adjoint() * &b;
    let cov_y = &b * sigma_x * b.adjoint() + noise;
    let err = sigma_x - &ah_b * sigma_x - sigma_x * ah_b.adjoint() + a.adjoint() * cov_y * &a;
    Ok(crate::linalg::trace_re(&err))
}
