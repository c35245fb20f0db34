//! Network geometry, spatial correlation, channel draws and pilot-based
//! channel estimation.

mod covariance;
mod estimation;
mod geometry;

pub use covariance::{
    local_scattering_covariance, quadrature_order, sample_channel, standard_complex_normal,
    ChannelSampler, GaussHermite,
};
pub use estimation::{dft_pilots, estimate_channels, ApChannelState, ApTruth};
pub use geometry::{ap_layout, large_scale_fading, pathloss_db, place_network, Geometry};

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{diag_real, CMatrix};

/// Spatial correlation between AP `(stripe, ap)` and UE `ue`.
pub fn spatial_covariance(
    geometry: &Geometry,
    stripe: usize,
    ap: usize,
    ue: usize,
    config: &SystemConfig,
) -> Result<CMatrix> {
    let beta = large_scale_fading(geometry, config, stripe, ap, ue)?;
    let r = local_scattering_covariance(
        config.antennas,
        beta,
        geometry.nominal_angle(stripe, ap, ue),
        config.angular_spread_rad,
        config.antenna_spacing,
        config.quadrature_order,
    )?;
    for k in 0..config.antennas {
        if ((r[(k, k)].re - beta) / beta).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "correlation diagonal {} deviates from beta {beta}",
                r[(k, k)].re
            )));
        }
    }
    Ok(r)
}

/// One complete network draw: geometry plus trained channel state at every
/// AP, grouped by stripe.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub geometry: Geometry,
    /// `aps[m][i]` is AP `(m, i)`.
    pub aps: Vec<Vec<ApChannelState>>,
    /// `diag(P_k)`.
    pub sigma_x: CMatrix,
}

impl Scenario {
    /// Places the network, draws channels and runs pilot training. All
    /// randomness comes from `rng`, consumed in a fixed order: UE drops,
    /// then for each AP the K channels followed by the pilot noise.
    pub fn generate<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Self> {
        let geometry = place_network(config, rng)?;
        let mut aps = Vec::with_capacity(config.stripes);
        for m in 0..config.stripes {
            let mut stripe = Vec::with_capacity(config.aps_per_stripe);
            for i in 0..config.aps_per_stripe {
                let truth = draw_truth(&geometry, config, m, i, rng)?;
                let state = estimate_channels(&truth, &config.ue_power_mw, config.noise_mw, rng)
                    .map_err(|e| e.at_ap(m + 1, i + 1))?;
                stripe.push(state);
            }
            aps.push(stripe);
        }
        Ok(Self {
            geometry,
            aps,
            sigma_x: diag_real(&config.ue_power_mw),
        })
    }

    pub fn stripes(&self) -> usize {
        self.aps.len()
    }
}

fn draw_truth<R: Rng + ?Sized>(
    geometry: &Geometry,
    config: &SystemConfig,
    m: usize,
    i: usize,
    rng: &mut R,
) -> Result<ApTruth> {
    let (n, k) = (config.antennas, config.ues);
    let mut r = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut h = CMatrix::zeros(n, k);
    for ue in 0..k {
        let cov =
            spatial_covariance(geometry, m, i, ue, config).map_err(|e| e.at_ap(m + 1, i + 1))?;
        let col = sample_channel(&cov, rng).map_err(|e| e.at_ap(m + 1, i + 1))?;
        h.set_column(ue, &col);
        beta.push(cov[(0, 0)].re);
        r.push(cov);
    }
    Ok(ApTruth { r, beta, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, hermitian_defect, hermitian_eigen, trace_re};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_scenario_invariants() {
        let cfg = SystemConfig::desk(2, 3, 4, 3, 6.0);
        let sc = Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        for stripe in &sc.aps {
            for ap in stripe {
                for k in 0..3 {
                    let r = &ap.r[k];
                    assert!(hermitian_defect(r) <= 1e-12 * ap.beta[k]);
                    assert!((trace_re(r) / 4.0 - ap.beta[k]).abs() <= 1e-12 * ap.beta[k]);
                    let (vals, _) = hermitian_eigen(r).unwrap();
                    assert!(*vals.last().unwrap() >= -1e-10 * trace_re(r));
                    let split = frobenius(&(&ap.r_hat[k] + &ap.r_tilde[k] - r)) / frobenius(r);
                    assert!(split < 1e-9);
                }
                crate::linalg::require_hpd(&ap.sigma_w, "sigma_w").unwrap();
            }
        }
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let cfg = SystemConfig::desk(2, 2, 3, 2, 6.0);
        let a = Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.geometry, b.geometry);
        for (sa, sb) in a.aps.iter().zip(&b.aps) {
            for (x, y) in sa.iter().zip(sb) {
                assert_eq!(x.h_hat, y.h_hat);
                assert_eq!(x.sigma_w, y.sigma_w);
            }
        }
    }
}
