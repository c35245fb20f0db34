//! Quick self-checks behind the CLI `verify` subcommand.
//!
//! Each check compares the library against a small independent
//! computation; they take a few seconds in total. The full acceptance
//! suite lives with the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SystemConfig;
use crate::coordination::run_protocol_with;
use crate::error::Result;
use crate::eval::{cutset_bound, fronthaul_rate, simulate_transmission, sum_rate_lb};
use crate::hybrid::HybridMode;
use crate::inp::{
    eigenmode_objective, observations, run_network, run_stripe_with, solve_quantizer, Scheme,
};
use crate::scenario::Scenario;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Grid search over the split of `c_f` bits between two modes.
fn two_mode_oracle(g: [f64; 2], c_f: f64, steps: usize) -> f64 {
    let info = |g: f64, b: f64| b - (1.0 + (b.exp2() - 1.0) / (g + 1.0)).log2();
    (0..=steps)
        .map(|i| {
            let b = c_f * i as f64 / steps as f64;
            info(g[0], b) + info(g[1], c_f - b)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn quantizer_oracle(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let g = [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)];
        let c_f = rng.random_range(1.0..12.0);
        let s = solve_quantizer(&g, c_f)?;
        worst = worst.max((eigenmode_objective(&g, &s.a) - two_mode_oracle(g, c_f, 2000)).abs());
    }
    Ok(check(
        "quantizer vs grid search",
        worst < 1e-3,
        format!("worst gap {worst:.2e} bits"),
    ))
}

fn pipeline(seed: u64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::desk(2, 4, 8, 4, 8.0);
    let c_f = cfg.fronthaul_bits;
    let mut worst_fh = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut identical = true;
    let mut cov_err = 0.0f64;
    for t in 0..10 {
        let sc = Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(t)))?;
        let obs = observations(&sc);
        let cutset = cutset_bound(&obs, &sc.sigma_x, c_f)?;
        for scheme in Scheme::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let net = run_network(&obs, &sc.sigma_x, c_f, scheme, HybridMode::Off, &mut rng)?;
            worst_excess =
                worst_excess.max(sum_rate_lb(&net.final_side_infos(), &sc.sigma_x)? - cutset);
            if scheme.compression == crate::inp::Compression::Optimized {
                for ap in net.stripes.iter().flat_map(|s| &s.aps) {
                    let si = &ap.side_info_out;
                    let fh = fronthaul_rate(&si.g_hat, &si.sigma_e, &sc.sigma_x, &ap.omega)?;
                    worst_fh = worst_fh.max((fh - c_f).abs());
                }
            }
            for (m, stripe) in obs.iter().enumerate() {
                let (proto, _) = run_protocol_with(
                    m + 1,
                    stripe,
                    &sc.sigma_x,
                    c_f,
                    scheme,
                    HybridMode::Off,
                    None,
                )?;
                let mono =
                    run_stripe_with(stripe, &sc.sigma_x, c_f, scheme, HybridMode::Off, None)?;
                identical &= proto.final_side_info == mono.final_side_info;
            }
            if t == 0 && scheme == Scheme::MMSE_OPT {
                cov_err = simulate_transmission(&net, &obs, &sc.sigma_x, 50_000, &mut rng)?
                    .relative_cov_error;
            }
        }
    }
    Ok(vec![
        check(
            "fronthaul budget met with equality",
            worst_fh < 1e-6,
            format!("worst |f_FH - C_F| {worst_fh:.2e} bits"),
        ),
        check(
            "sum-rate below cutset",
            worst_excess <= 1e-6,
            format!("max(sum-rate - cutset) {worst_excess:.3}"),
        ),
        check(
            "protocol equals monolithic run",
            identical,
            "10 trials x 4 schemes x 2 stripes".into(),
        ),
        check(
            "Monte-Carlo covariance",
            cov_err < 0.05,
            format!("relative error {:.2}%", 100.0 * cov_err),
        ),
    ])
}

/// Runs every check; errors inside a check count as failures.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match quantizer_oracle(&mut rng) {
        Ok(c) => out.push(c),
        Err(e) => out.push(check("quantizer vs grid search", false, e.to_string())),
    }
    match pipeline(seed) {
        Ok(cs) => out.extend(cs),
        Err(e) => out.push(check("pipeline", false, e.to_string())),
    }
    out
}
