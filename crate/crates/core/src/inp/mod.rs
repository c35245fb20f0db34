//! Sequential in-network processing along a radio stripe.
//!
//! Each AP combines its own antenna signals with the compressed signal of
//! its predecessor, then compresses the K-dimensional result for the next
//! hop. Design runs AP by AP: the only thing an AP needs from upstream is
//! the [`SideInfo`] pair `(G_hat, Sigma_e)`.

mod combiner;
mod quantizer;

pub use combiner::{
    combiner_mse, conditional_mmse_v, mmse_combiners, update_effective_channel, update_noise_cov,
    Combiners,
};
pub use quantizer::{
    bisect_multiplier, closed_form_a, design_quantizer, diagonal_omega, eigenmode_objective,
    fronthaul_budget, quantizer_eigenvalues, realize_quantizer, recover_omega, solve_quantizer,
    stationarity_residual, QuantizerBasis, QuantizerDesign, QuantizerSolution, A_MIN,
    BISECTION_MAX_ITER, BISECTION_TOL_BITS, LAMBDA_MIN, SIGNAL_FLOOR,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{mrc_combiners, naive_fh};
use crate::hybrid::{fit_digital, project_analog, random_analog, HybridCombiner, HybridMode};
use crate::linalg::{hermitian_part, CMatrix};
use crate::scenario::{ApChannelState, Scenario};

/// What AP `(m, i)` forwards to AP `(m, i + 1)` during design.
#[derive(Clone, Debug, PartialEq)]
pub struct SideInfo {
    /// K x K effective channel from the UEs to the stripe signal.
    pub g_hat: CMatrix,
    /// K x K covariance of everything in the stripe signal that is not
    /// `G_hat x`.
    pub sigma_e: CMatrix,
}

impl SideInfo {
    /// Signaling cost of one message, counted as `2K^2` real values.
    pub fn overhead_reals(&self) -> usize {
        let k = self.g_hat.nrows();
        2 * k * k
    }
}

/// Local CSI an AP designs with.
#[derive(Clone, Debug)]
pub struct ApObservation {
    pub h_hat: CMatrix,
    pub sigma_w: CMatrix,
}

impl From<&ApChannelState> for ApObservation {
    fn from(s: &ApChannelState) -> Self {
        Self {
            h_hat: s.h_hat.clone(),
            sigma_w: s.sigma_w.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combining {
    Mmse,
    Mrc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    /// Eigenmode allocation with the bisected multiplier.
    Optimized,
    /// Per-entry quantization with equal rates.
    Naive,
}

/// Combining rule and compression rule used at every AP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheme {
    pub combining: Combining,
    pub compression: Compression,
}

impl Scheme {
    pub const MMSE_OPT: Scheme = Scheme {
        combining: Combining::Mmse,
        compression: Compression::Optimized,
    };
    pub const MRC_OPT: Scheme = Scheme {
        combining: Combining::Mrc,
        compression: Compression::Optimized,
    };
    pub const MMSE_NAIVE: Scheme = Scheme {
        combining: Combining::Mmse,
        compression: Compression::Naive,
    };
    pub const MRC_NAIVE: Scheme = Scheme {
        combining: Combining::Mrc,
        compression: Compression::Naive,
    };
    pub const ALL: [Scheme; 4] = [
        Self::MMSE_OPT,
        Self::MRC_OPT,
        Self::MMSE_NAIVE,
        Self::MRC_NAIVE,
    ];

    pub fn label(&self) -> &'static str {
        match (self.combining, self.compression) {
            (Combining::Mmse, Compression::Optimized) => "mmse-opt",
            (Combining::Mrc, Compression::Optimized) => "mrc-opt",
            (Combining::Mmse, Compression::Naive) => "mmse-naive",
            (Combining::Mrc, Compression::Naive) => "mrc-naive",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme '{s}'")))
    }
}

/// Eigenmode allocation chosen by the optimized quantizer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantizerReport {
    pub gamma_eig: Vec<f64>,
    pub solution: QuantizerSolution,
}

/// Design outcome at one AP.
#[derive(Clone, Debug)]
pub struct ApInpResult {
    pub u: CMatrix,
    pub v: Option<CMatrix>,
    pub omega: CMatrix,
    pub sigma_n: CMatrix,
    /// Mode attenuation of the optimized quantizer (see [`A_MIN`]). It is
    /// already folded into `u`, `v`, `sigma_n` and the outgoing channel.
    pub shaping: Option<CMatrix>,
    /// Present for the optimized quantizer only.
    pub quantizer: Option<QuantizerReport>,
    /// Present when the AP runs a hybrid analog/digital front end.
    pub hybrid: Option<HybridCombiner>,
    pub side_info_out: SideInfo,
}

/// Per-AP options beyond the scheme.
#[derive(Clone, Copy, Debug, Default)]
pub struct ApOptions<'a> {
    pub hybrid: HybridMode,
    /// Analog stage for [`HybridMode::Random`].
    pub analog: Option<&'a CMatrix>,
}

/// Runs one AP: combiners, effective channel and noise update, quantizer.
pub fn process_ap(
    obs: &ApObservation,
    prev: Option<&SideInfo>,
    sigma_x: &CMatrix,
    c_f: f64,
    scheme: Scheme,
    options: ApOptions<'_>,
) -> Result<ApInpResult> {
    let Combiners { mut u, mut v } = match scheme.combining {
        Combining::Mmse => mmse_combiners(&obs.h_hat, &obs.sigma_w, prev, sigma_x)?,
        Combining::Mrc => mrc_combiners(&obs.h_hat, prev.is_some()),
    };

    let hybrid = match options.hybrid {
        HybridMode::Off => None,
        mode => {
            let analog = match mode {
                HybridMode::Random => options.analog.cloned().ok_or_else(|| {
                    Error::Domain("random hybrid mode needs an analog combiner".into())
                })?,
                _ => project_analog(&u),
            };
            let digital = fit_digital(&u, &analog)?;
            let h = HybridCombiner::new(analog, digital);
            u = h.combined.clone();
            if let (Combining::Mmse, Some(si)) = (scheme.combining, prev) {
                v = Some(conditional_mmse_v(&u, &obs.h_hat, si, sigma_x)?);
            }
            Some(h)
        }
    };

    let mut g_hat = update_effective_channel(&u, v.as_ref(), &obs.h_hat, prev)?;
    let mut sigma_n = update_noise_cov(&u, v.as_ref(), &obs.sigma_w, prev)?;

    let (omega, quantizer, shaping) = match scheme.compression {
        Compression::Optimized => {
            let d = design_quantizer(&g_hat, &sigma_n, sigma_x, c_f)?;
            (
                d.omega,
                Some(QuantizerReport {
                    gamma_eig: d.basis.gamma,
                    solution: d.solution,
                }),
                d.shaping,
            )
        }
        Compression::Naive => (naive_fh(&g_hat, &sigma_n, sigma_x, c_f)?, None, None),
    };
    if let Some(t) = &shaping {
        // T r with r = U^H y + V^H r_prev is (U T^H)^H y + (V T^H)^H r_prev.
        u = &u * t.adjoint();
        v = v.map(|v| v * t.adjoint());
        g_hat = t * g_hat;
        sigma_n = hermitian_part(&(t * &sigma_n * t.adjoint()));
    }

    let sigma_e = hermitian_part(&(&sigma_n + &omega));
    Ok(ApInpResult {
        u,
        v,
        omega,
        sigma_n,
        shaping,
        quantizer,
        hybrid,
        side_info_out: SideInfo { g_hat, sigma_e },
    })
}

/// Design results of one stripe; `final_side_info` is what the processor
/// receives.
#[derive(Clone, Debug)]
pub struct StripeOutcome {
    pub aps: Vec<ApInpResult>,
    pub final_side_info: SideInfo,
}

/// Sequential design of one stripe with MMSE combining and the optimized
/// quantizer.
pub fn run_stripe(aps: &[ApObservation], sigma_x: &CMatrix, c_f: f64) -> Result<StripeOutcome> {
    run_stripe_with(aps, sigma_x, c_f, Scheme::MMSE_OPT, HybridMode::Off, None)
}

/// Sequential design of one stripe. `analog` supplies one analog combiner
/// per AP when `hybrid` is [`HybridMode::Random`].
pub fn run_stripe_with(
    aps: &[ApObservation],
    sigma_x: &CMatrix,
    c_f: f64,
    scheme: Scheme,
    hybrid: HybridMode,
    analog: Option<&[CMatrix]>,
) -> Result<StripeOutcome> {
    if aps.is_empty() {
        return Err(Error::Domain("a stripe needs at least one AP".into()));
    }
    let mut results: Vec<ApInpResult> = Vec::with_capacity(aps.len());
    for (i, obs) in aps.iter().enumerate() {
        let prev = results.last().map(|r| &r.side_info_out);
        let options = ApOptions {
            hybrid,
            analog: analog.and_then(|a| a.get(i)),
        };
        let res =
            process_ap(obs, prev, sigma_x, c_f, scheme, options).map_err(|e| e.at_ap(0, i + 1))?;
        results.push(res);
    }
    let final_side_info = results.last().expect("non-empty").side_info_out.clone();
    Ok(StripeOutcome {
        aps: results,
        final_side_info,
    })
}

/// Design of every stripe of a scenario.
#[derive(Clone, Debug)]
pub struct NetworkDesign {
    pub scheme: Scheme,
    pub hybrid: HybridMode,
    pub stripes: Vec<StripeOutcome>,
}

impl NetworkDesign {
    pub fn final_side_infos(&self) -> Vec<SideInfo> {
        self.stripes
            .iter()
            .map(|s| s.final_side_info.clone())
            .collect()
    }
}

/// Observations grouped by stripe.
pub fn observations(scenario: &Scenario) -> Vec<Vec<ApObservation>> {
    scenario
        .aps
        .iter()
        .map(|stripe| stripe.iter().map(ApObservation::from).collect())
        .collect()
}

/// Designs every stripe. Random analog combiners, when requested, are
/// drawn from `rng` stripe by stripe before any design starts.
pub fn run_network<R: Rng + ?Sized>(
    stripes: &[Vec<ApObservation>],
    sigma_x: &CMatrix,
    c_f: f64,
    scheme: Scheme,
    hybrid: HybridMode,
    rng: &mut R,
) -> Result<NetworkDesign> {
    let analog: Vec<Vec<CMatrix>> = match hybrid {
        HybridMode::Random => stripes
            .iter()
            .map(|s| {
                s.iter()
                    .map(|obs| random_analog(obs.h_hat.nrows(), obs.h_hat.ncols(), rng))
                    .collect()
            })
            .collect(),
        _ => Vec::new(),
    };
    let run = |m: usize| {
        run_stripe_with(
            &stripes[m],
            sigma_x,
            c_f,
            scheme,
            hybrid,
            analog.get(m).map(Vec::as_slice),
        )
        .map_err(|e| e.in_stripe(m + 1))
    };

    #[cfg(feature = "parallel")]
    let outcomes: Result<Vec<_>> = {
        use rayon::prelude::*;
        (0..stripes.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Result<Vec<_>> = (0..stripes.len()).map(run).collect();

    Ok(NetworkDesign {
        scheme,
        hybrid,
        stripes: outcomes?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::eval::fronthaul_rate;
    use crate::linalg::frobenius;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(seed: u64) -> Scenario {
        let cfg = SystemConfig::desk(2, 3, 4, 2, 6.0);
        Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn single_ap_stripe_equals_direct_calls() {
        let sc = scenario(1);
        let obs = ApObservation::from(&sc.aps[0][0]);
        let out = run_stripe(std::slice::from_ref(&obs), &sc.sigma_x, 6.0).unwrap();
        let cmb = mmse_combiners(&obs.h_hat, &obs.sigma_w, None, &sc.sigma_x).unwrap();
        let g = update_effective_channel(&cmb.u, None, &obs.h_hat, None).unwrap();
        let sn = update_noise_cov(&cmb.u, None, &obs.sigma_w, None).unwrap();
        let d = design_quantizer(&g, &sn, &sc.sigma_x, 6.0).unwrap();
        let t = d.shaping.unwrap_or_else(|| crate::linalg::identity(2));
        assert_eq!(out.aps[0].u, &cmb.u * t.adjoint());
        assert_eq!(out.final_side_info.g_hat, &t * g);
        assert_eq!(out.aps[0].omega, d.omega);
    }

    #[test]
    fn every_ap_uses_the_whole_budget() {
        let sc = scenario(2);
        for stripe in observations(&sc) {
            let out = run_stripe(&stripe, &sc.sigma_x, 6.0).unwrap();
            for ap in &out.aps {
                let si = &ap.side_info_out;
                let rate = fronthaul_rate(&si.g_hat, &si.sigma_e, &sc.sigma_x, &ap.omega).unwrap();
                assert!((rate - 6.0).abs() < 1e-6, "rate {rate}");
            }
        }
    }

    #[test]
    fn stripe_order_does_not_matter() {
        let sc = scenario(3);
        let obs = observations(&sc);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = run_network(
            &obs,
            &sc.sigma_x,
            6.0,
            Scheme::MMSE_OPT,
            HybridMode::Off,
            &mut rng,
        )
        .unwrap();
        let second_first = run_stripe(&obs[1], &sc.sigma_x, 6.0).unwrap();
        let first_second = run_stripe(&obs[0], &sc.sigma_x, 6.0).unwrap();
        assert_eq!(net.stripes[1].final_side_info, second_first.final_side_info);
        assert_eq!(net.stripes[0].final_side_info, first_second.final_side_info);
    }

    #[test]
    fn sigma_e_is_sigma_n_plus_omega() {
        let sc = scenario(4);
        let out = run_stripe(&observations(&sc)[0], &sc.sigma_x, 6.0).unwrap();
        for ap in &out.aps {
            let diff = frobenius(&(&ap.side_info_out.sigma_e - &ap.sigma_n - &ap.omega));
            assert!(diff <= 1e-10 * frobenius(&ap.side_info_out.sigma_e));
        }
    }

    #[test]
    fn scheme_labels_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
        assert!("mmse".parse::<Scheme>().is_err());
    }

    #[test]
    fn errors_carry_the_ap_index() {
        let sc = scenario(5);
        let mut obs = observations(&sc)[0].clone();
        obs[1].sigma_w = -crate::linalg::identity(4);
        let err = run_stripe(&obs, &sc.sigma_x, 6.0).unwrap_err();
        assert!(matches!(err, Error::AtAp { ap: 2, .. }), "{err}");
    }
}
