//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types. The `*_json` functions hold the
//! logic and are what the native tests call.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stripe_inp::experiment::{evaluate_trial, trial_seed};
use stripe_inp::inp::solve_quantizer;
use stripe_inp::scenario::place_network;
use stripe_inp::{HybridMode, Scheme, SystemConfig};
use wasm_bindgen::prelude::*;

/// Largest trial count the page may request per point; keeps the tab
/// responsive.
pub const MAX_TRIALS: usize = 50;

#[derive(Serialize)]
struct WaterFill {
    a: Vec<f64>,
    /// Bits spent on each mode, `log2(1 + a (g + 1))`.
    bits: Vec<f64>,
    /// Information carried by each mode.
    info: Vec<f64>,
    lambda: f64,
}

pub fn water_fill_json(gammas: &[f64], c_f: f64) -> Result<String, String> {
    let s = solve_quantizer(gammas, c_f).map_err(|e| e.to_string())?;
    let bits = gammas
        .iter()
        .zip(&s.a)
        .map(|(g, a)| (1.0 + a * (g + 1.0)).log2())
        .collect();
    let info = gammas
        .iter()
        .zip(&s.a)
        .map(|(g, a)| (1.0 + a * (g + 1.0)).log2() - (1.0 + a).log2())
        .collect();
    let out = WaterFill {
        a: s.a,
        bits,
        info,
        lambda: s.lambda,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn layout_json(
    stripes: usize,
    aps_per_stripe: usize,
    ues: usize,
    seed: u64,
) -> Result<String, String> {
    let mut cfg = SystemConfig::desk(stripes, aps_per_stripe, 1, ues, 1.0);
    cfg.seed = seed;
    cfg.validate().map_err(|e| e.to_string())?;
    let g = place_network(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
    serde_json::to_string(&serde_json::json!({
        "radius": cfg.coverage_radius_m,
        "geometry": g,
    }))
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    c_f: Vec<f64>,
    cutset: Vec<f64>,
    /// Scheme label and mean sum-rate at each `c_f`.
    schemes: Vec<(String, Vec<f64>)>,
}

#[allow(clippy::too_many_arguments)]
pub fn rate_curve_json(
    stripes: usize,
    aps_per_stripe: usize,
    antennas: usize,
    ues: usize,
    trials: usize,
    seed: u64,
    c_f_values: &[f64],
) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be between 1 and {MAX_TRIALS}"));
    }
    let schemes = Scheme::ALL;
    let mut curve = Curve {
        c_f: c_f_values.to_vec(),
        cutset: Vec::new(),
        schemes: schemes
            .iter()
            .map(|s| (s.label().to_string(), Vec::new()))
            .collect(),
    };
    for &c_f in c_f_values {
        let cfg = SystemConfig::desk(stripes, aps_per_stripe, antennas, ues, c_f);
        cfg.validate().map_err(|e| e.to_string())?;
        let mut cut = 0.0;
        let mut sums = vec![0.0; schemes.len()];
        for t in 0..trials {
            let out = evaluate_trial(&cfg, &schemes, HybridMode::Off, trial_seed(seed, t as u64))
                .map_err(|e| e.to_string())?;
            cut += out.cutset;
            for (s, o) in sums.iter_mut().zip(&out.schemes) {
                *s += o.sum_rate;
            }
        }
        curve.cutset.push(cut / trials as f64);
        for ((_, ys), s) in curve.schemes.iter_mut().zip(sums) {
            ys.push(s / trials as f64);
        }
    }
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

/// Optimal bit allocation over whitened eigenmode SNRs.
#[wasm_bindgen]
pub fn water_fill(gammas: Vec<f64>, c_f: f64) -> Result<String, JsError> {
    water_fill_json(&gammas, c_f).map_err(|e| JsError::new(&e))
}

/// AP and UE positions of one network draw.
#[wasm_bindgen]
pub fn layout(
    stripes: usize,
    aps_per_stripe: usize,
    ues: usize,
    seed: u64,
) -> Result<String, JsError> {
    layout_json(stripes, aps_per_stripe, ues, seed).map_err(|e| JsError::new(&e))
}

/// Mean sum-rate of every scheme, and the cutset bound, against `C_F`.
#[wasm_bindgen]
pub fn rate_curve(
    stripes: usize,
    aps_per_stripe: usize,
    antennas: usize,
    ues: usize,
    trials: usize,
    seed: u64,
    c_f_values: Vec<f64>,
) -> Result<String, JsError> {
    rate_curve_json(
        stripes,
        aps_per_stripe,
        antennas,
        ues,
        trials,
        seed,
        &c_f_values,
    )
    .map_err(|e| JsError::new(&e))
}
