use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, identity, solve_hpd, CMatrix};

use super::covariance::standard_complex_normal;

/// True channels of one AP before training.
#[derive(Clone, Debug)]
pub struct ApTruth {
    /// Spatial covariance per UE.
    pub r: Vec<CMatrix>,
    /// Large-scale fading per UE, `trace(R_k) / N`.
    pub beta: Vec<f64>,
    /// N x K matrix whose k-th column is the channel of UE k.
    pub h: CMatrix,
}

/// Channel state known at one AP after pilot training.
#[derive(Clone, Debug, Serialize)]
pub struct ApChannelState {
    #[serde(skip)]
    pub r: Vec<CMatrix>,
    pub beta: Vec<f64>,
    #[serde(skip)]
    pub h: CMatrix,
    /// N x K estimate, one column per UE.
    #[serde(skip)]
    pub h_hat: CMatrix,
    #[serde(skip)]
    pub r_hat: Vec<CMatrix>,
    #[serde(skip)]
    pub r_tilde: Vec<CMatrix>,
    /// Covariance of estimation error plus receiver noise.
    #[serde(skip)]
    pub sigma_w: CMatrix,
}

impl ApChannelState {
    pub fn antennas(&self) -> usize {
        self.h_hat.nrows()
    }

    pub fn ues(&self) -> usize {
        self.h_hat.ncols()
    }
}

/// Orthogonal length-K pilot sequences: row k is `phi_k`, with
/// `phi_k^H phi_l = K delta_kl`.
pub fn dft_pilots(k: usize) -> CMatrix {
    CMatrix::from_fn(k, k, |row, t| {
        let theta = -2.0 * PI * (row * t) as f64 / k as f64;
        c(theta.cos(), theta.sin())
    })
}

/// `R_hat = P K R (P K R + sigma^2 I)^{-1} R` together with the filter
/// `sqrt(P K) R (P K R + sigma^2 I)^{-1}` applied to the despread pilot.
fn mmse_filter(
    r: &CMatrix,
    power: f64,
    pilot_len: usize,
    noise: f64,
) -> Result<(CMatrix, CMatrix)> {
    let n = r.nrows();
    let gain = power * pilot_len as f64;
    let q = r.scale(gain) + identity(n).scale(noise);
    // Q is a polynomial in R, so R Q^{-1} = Q^{-1} R.
    let q_inv_r = solve_hpd(&q, r)?;
    let filter = q_inv_r.scale(gain.sqrt());
    let r_hat = hermitian_part(&(r * &q_inv_r).scale(gain));
    Ok((filter, r_hat))
}

/// Pilot training and linear MMSE estimation at one AP.
///
/// Simulates the N x K pilot observation `Y = sum_k sqrt(P_k) h_k phi_k^T + Z`,
/// despreads it with each pilot and filters it. `noise` is the receiver
/// noise power and `powers[k]` the pilot power of UE k.
pub fn estimate_channels<R: Rng + ?Sized>(
    truth: &ApTruth,
    powers: &[f64],
    noise: f64,
    rng: &mut R,
) -> Result<ApChannelState> {
    let (n, k) = truth.h.shape();
    if truth.r.len() != k || powers.len() != k {
        return Err(Error::Domain(
            "estimate_channels: UE counts disagree".into(),
        ));
    }
    if !(noise > 0.0) {
        return Err(Error::Domain("receiver noise must be positive".into()));
    }
    let pilots = dft_pilots(k);

    let mut y = CMatrix::zeros(n, k);
    for t in 0..k {
        let z = standard_complex_normal(n, rng).scale(noise.sqrt());
        let mut col = z;
        for ue in 0..k {
            col += truth.h.column(ue) * (pilots[(ue, t)] * powers[ue].sqrt());
        }
        y.set_column(t, &col);
    }

    let mut h_hat = CMatrix::zeros(n, k);
    let mut r_hat = Vec::with_capacity(k);
    let mut r_tilde = Vec::with_capacity(k);
    let mut sigma_w = identity(n).scale(noise);
    for (ue, &power) in powers.iter().enumerate().take(k) {
        let phi_conj = pilots.row(ue).adjoint();
        let despread = (&y * phi_conj).scale(1.0 / (k as f64).sqrt());
        let (filter, rh) = mmse_filter(&truth.r[ue], power, k, noise)?;
        h_hat.set_column(ue, &(&filter * despread).column(0));
        let rt = hermitian_part(&(&truth.r[ue] - &rh));
        sigma_w += rt.scale(power);
        r_hat.push(rh);
        r_tilde.push(rt);
    }
    Ok(ApChannelState {
        r: truth.r.clone(),
        beta: truth.beta.clone(),
        h: truth.h.clone(),
        h_hat,
        r_hat,
        r_tilde,
        sigma_w: hermitian_part(&sigma_w),
    })
}
