//! Seeded Monte-Carlo runs and parameter sweeps.
//!
//! Trial `t` of a run with master seed `s` draws its scenario from
//! `ChaCha8Rng::seed_from_u64(trial_seed(s, t))`. The same trial seeds are
//! reused for every sweep value and scheme, so curves are compared on
//! common random numbers and adding trials never changes earlier ones.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::config::{bits_per_channel_use, dbm_to_mw, mw_to_dbm, Placement, SystemConfig};
use crate::error::{Error, Result};
use crate::eval::{cutset_bound, fronthaul_rate, side_info_overhead, sum_rate_lb};
use crate::hybrid::HybridMode;
use crate::inp::{observations, run_network, Scheme};
use crate::scenario::Scenario;

/// Stream of the per-trial generator reserved for random analog phases.
const ANALOG_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Fronthaul capacity in bits per channel use.
    FronthaulBits,
    /// Stripe count at a fixed total AP count.
    Stripes,
    /// UE transmit power in dBm.
    PowerDbm,
    /// Antennas per AP.
    Antennas,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::FronthaulBits => "C_F",
            SweepAxis::Stripes => "M",
            SweepAxis::PowerDbm => "P_tx",
            SweepAxis::Antennas => "N",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C_F" => Ok(SweepAxis::FronthaulBits),
            "M" => Ok(SweepAxis::Stripes),
            "P_tx" => Ok(SweepAxis::PowerDbm),
            "N" => Ok(SweepAxis::Antennas),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis '{other}' (expected C_F, M, P_tx or N)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    /// `M * L`, held fixed when sweeping `M`.
    pub total_aps: usize,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub schemes: Vec<Scheme>,
    pub hybrid: HybridMode,
    pub output_path: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let base = SystemConfig::default();
        Self {
            total_aps: base.total_aps(),
            base,
            sweep: None,
            schemes: vec![Scheme::MMSE_OPT],
            hybrid: HybridMode::Off,
            output_path: None,
        }
    }
}

impl ExperimentSpec {
    /// Sweep values, or a single `None` for a one-point run.
    pub fn points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some((_, values)) => values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }

    /// Configuration at one sweep value.
    pub fn config_at(&self, value: Option<f64>) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        if let (Some((axis, _)), Some(v)) = (&self.sweep, value) {
            match axis {
                SweepAxis::FronthaulBits => cfg.fronthaul_bits = v,
                SweepAxis::PowerDbm => cfg = cfg.with_uniform_power_mw(dbm_to_mw(v)),
                SweepAxis::Antennas => cfg.antennas = positive_integer(v, "N")?,
                SweepAxis::Stripes => {
                    let m = positive_integer(v, "M")?;
                    if !self.total_aps.is_multiple_of(m) {
                        return Err(Error::InvalidConfig(format!(
                            "M = {m} does not divide the {} APs",
                            self.total_aps
                        )));
                    }
                    let placement_fixed = cfg.placement != Placement::default_for(cfg.stripes);
                    let placement = cfg.placement;
                    cfg = cfg.with_stripes(m, self.total_aps / m);
                    if placement_fixed {
                        cfg.placement = placement;
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        if let Some((_, values)) = &self.sweep {
            if values.is_empty() {
                return Err(Error::InvalidConfig("sweep_values is empty".into()));
            }
        }
        for p in self.points() {
            self.config_at(p)?;
        }
        Ok(())
    }
}

fn positive_integer(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be a positive integer, got {v}"
        )))
    }
}

/// Keys accepted in a configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ConfigFile {
    M: Option<usize>,
    L: Option<usize>,
    N: Option<usize>,
    K: Option<usize>,
    total_aps: Option<usize>,
    C_F_bits: Option<f64>,
    C_F_gbps: Option<f64>,
    P_tx_mw: Option<f64>,
    P_tx_dbm: Option<f64>,
    sigma_z2_dbm: Option<f64>,
    bandwidth_mhz: Option<f64>,
    radius_m: Option<f64>,
    ap_radius_m: Option<f64>,
    ap_height_delta_m: Option<f64>,
    sigma_phi_deg: Option<f64>,
    d_H: Option<f64>,
    quadrature_order: Option<usize>,
    placement: Option<Placement>,
    seed: Option<u64>,
    trials: Option<usize>,
    sweep_axis: Option<String>,
    sweep_values: Option<Vec<f64>>,
    schemes: Option<Vec<String>>,
    hybrid: Option<String>,
    output_path: Option<String>,
}

fn exclusive<T>(a: Option<T>, b: Option<T>, names: &str) -> Result<Option<(T, bool)>> {
    match (a, b) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(format!("give only one of {names}"))),
        (Some(x), None) => Ok(Some((x, true))),
        (None, Some(y)) => Ok(Some((y, false))),
        (None, None) => Ok(None),
    }
}

/// Parses a JSON configuration. Missing keys take the desk defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let d = SystemConfig::default();
    let m = file.M.unwrap_or(d.stripes);
    let l = match (file.L, file.total_aps) {
        (Some(l), Some(t)) if l * m != t => {
            return Err(Error::InvalidConfig(format!(
                "L = {l} with M = {m} does not give {t} APs"
            )))
        }
        (Some(l), _) => l,
        (None, Some(t)) => {
            if m == 0 || t % m != 0 {
                return Err(Error::InvalidConfig(format!(
                    "total_aps = {t} is not divisible by M = {m}"
                )));
            }
            t / m
        }
        (None, None) => d.aps_per_stripe,
    };
    let k = file.K.unwrap_or(d.ues);
    let mut cfg = SystemConfig::desk(m, l, file.N.unwrap_or(d.antennas), k, d.fronthaul_bits);
    if let Some(b) = file.bandwidth_mhz {
        cfg.bandwidth_hz = b * 1e6;
    }
    if let Some((v, is_bits)) = exclusive(file.C_F_bits, file.C_F_gbps, "C_F_bits and C_F_gbps")? {
        cfg.fronthaul_bits = if is_bits {
            v
        } else {
            bits_per_channel_use(v * 1e9, cfg.bandwidth_hz)
        };
    }
    if let Some((v, is_mw)) = exclusive(file.P_tx_mw, file.P_tx_dbm, "P_tx_mw and P_tx_dbm")? {
        cfg = cfg.with_uniform_power_mw(if is_mw { v } else { dbm_to_mw(v) });
    }
    if let Some(v) = file.sigma_z2_dbm {
        cfg.noise_mw = dbm_to_mw(v);
    }
    if let Some(v) = file.radius_m {
        cfg.coverage_radius_m = v;
        cfg.ap_radius_m = v;
    }
    if let Some(v) = file.ap_radius_m {
        cfg.ap_radius_m = v;
    }
    if let Some(v) = file.ap_height_delta_m {
        cfg.ap_height_delta_m = v;
    }
    if let Some(v) = file.sigma_phi_deg {
        cfg.angular_spread_rad = v.to_radians();
    }
    if let Some(v) = file.d_H {
        cfg.antenna_spacing = v;
    }
    if let Some(v) = file.quadrature_order {
        cfg.quadrature_order = v;
    }
    if let Some(p) = file.placement {
        cfg.placement = p;
    }
    if let Some(s) = file.seed {
        cfg.seed = s;
    }
    if let Some(t) = file.trials {
        cfg.trials = t;
    }

    let sweep = match (file.sweep_axis, file.sweep_values) {
        (Some(axis), Some(values)) => Some((axis.parse()?, values)),
        (None, None) => None,
        _ => {
            return Err(Error::InvalidConfig(
                "sweep_axis and sweep_values go together".into(),
            ))
        }
    };
    let schemes = match file.schemes {
        Some(list) => list
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Scheme>>>()?,
        None => vec![Scheme::MMSE_OPT],
    };
    let hybrid = match file.hybrid {
        Some(h) => h.parse()?,
        None => HybridMode::Off,
    };
    let spec = ExperimentSpec {
        total_aps: cfg.total_aps(),
        base: cfg,
        sweep,
        schemes,
        hybrid,
        output_path: file.output_path,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// Per-trial seed derived from the master seed (SplitMix64 finalizer).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One scheme evaluated on one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeOutcome {
    pub sum_rate: f64,
    /// Mean over APs of the rate each AP puts on its outgoing link.
    pub mean_fh_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub cutset: f64,
    /// In the order of the requested schemes.
    pub schemes: Vec<SchemeOutcome>,
}

/// Draws the scenario of one trial and evaluates every scheme on it.
pub fn evaluate_trial(
    cfg: &SystemConfig,
    schemes: &[Scheme],
    hybrid: HybridMode,
    seed: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = Scenario::generate(cfg, &mut rng)?;
    let obs = observations(&scenario);
    let c_f = cfg.fronthaul_bits;
    let cutset = cutset_bound(&obs, &scenario.sigma_x, c_f)?;
    let mut out = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let mut analog_rng = ChaCha8Rng::seed_from_u64(seed);
        analog_rng.set_stream(ANALOG_STREAM);
        let net = run_network(
            &obs,
            &scenario.sigma_x,
            c_f,
            scheme,
            hybrid,
            &mut analog_rng,
        )?;
        let mut fh = 0.0;
        let mut count = 0;
        for stripe in &net.stripes {
            for ap in &stripe.aps {
                let si = &ap.side_info_out;
                fh += fronthaul_rate(&si.g_hat, &si.sigma_e, &scenario.sigma_x, &ap.omega)?;
                count += 1;
            }
        }
        out.push(SchemeOutcome {
            sum_rate: sum_rate_lb(&net.final_side_infos(), &scenario.sigma_x)?,
            mean_fh_rate: fh / count as f64,
        });
    }
    Ok(TrialOutcome {
        cutset,
        schemes: out,
    })
}

/// Runs `trials` trials at one configuration, in parallel when enabled;
/// results come back in trial order.
pub fn run_trials(
    cfg: &SystemConfig,
    schemes: &[Scheme],
    hybrid: HybridMode,
) -> Result<Vec<TrialOutcome>> {
    let one = |t: usize| evaluate_trial(cfg, schemes, hybrid, trial_seed(cfg.seed, t as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.trials).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.trials).map(one).collect()
    }
}

/// One CSV row: one scheme at one sweep value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub hybrid: HybridMode,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub mean_cutset: f64,
    pub mean_fh_rate: f64,
    /// Side-information reals exchanged per network design.
    pub overhead_reals: usize,
    pub config: SystemConfig,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sweeps every point, averaging over trials in trial order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let axis = spec.sweep.as_ref().map(|(a, _)| *a);
    let mut rows = Vec::new();
    for value in spec.points() {
        let cfg = spec.config_at(value)?;
        log::info!(
            "{} = {}: {} trials",
            axis.map_or("point", SweepAxis::label),
            value.map_or(String::from("-"), |v| v.to_string()),
            cfg.trials
        );
        let trials = run_trials(&cfg, &spec.schemes, spec.hybrid)?;
        let cutsets: Vec<f64> = trials.iter().map(|t| t.cutset).collect();
        let (mean_cutset, _) = mean_std(&cutsets);
        for (j, &scheme) in spec.schemes.iter().enumerate() {
            let rates: Vec<f64> = trials.iter().map(|t| t.schemes[j].sum_rate).collect();
            let fh: Vec<f64> = trials.iter().map(|t| t.schemes[j].mean_fh_rate).collect();
            let (mean_sum_rate, std_sum_rate) = mean_std(&rates);
            rows.push(SweepRow {
                sweep_axis: axis,
                sweep_value: value,
                scheme,
                hybrid: spec.hybrid,
                mean_sum_rate,
                std_sum_rate,
                mean_cutset,
                mean_fh_rate: mean_std(&fh).0,
                overhead_reals: cfg.total_aps() * side_info_overhead(scheme, cfg.ues).per_link,
                config: cfg.clone(),
            });
        }
    }
    Ok(rows)
}

pub const CSV_COLUMNS: &[&str] = &[
    "sweep_axis",
    "sweep_value",
    "scheme",
    "hybrid",
    "mean_sum_rate",
    "std_sum_rate",
    "mean_cutset",
    "mean_fh_rate",
    "overhead_reals",
    "trials",
    "seed",
    "M",
    "L",
    "N",
    "K",
    "C_F_bits",
    "P_tx_dbm",
    "sigma_z2_dbm",
    "bandwidth_hz",
    "radius_m",
    "ap_radius_m",
    "sigma_phi_rad",
    "d_H",
    "placement",
    "si_messages",
    "si_reals_per_link",
];

fn float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Renders rows as CSV with 9 significant digits.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let c = &r.config;
        let fields = [
            r.sweep_axis.map_or("none", SweepAxis::label).to_string(),
            r.sweep_value.map_or(String::new(), float),
            r.scheme.label().to_string(),
            r.hybrid.label().to_string(),
            float(r.mean_sum_rate),
            float(r.std_sum_rate),
            float(r.mean_cutset),
            float(r.mean_fh_rate),
            r.overhead_reals.to_string(),
            c.trials.to_string(),
            c.seed.to_string(),
            c.stripes.to_string(),
            c.aps_per_stripe.to_string(),
            c.antennas.to_string(),
            c.ues.to_string(),
            float(c.fronthaul_bits),
            float(mw_to_dbm(c.ue_power_mw[0])),
            float(mw_to_dbm(c.noise_mw)),
            float(c.bandwidth_hz),
            float(c.coverage_radius_m),
            float(c.ap_radius_m),
            float(c.angular_spread_rad),
            float(c.antenna_spacing),
            c.placement.label().to_string(),
            c.total_aps().to_string(),
            side_info_overhead(r.scheme, c.ues).per_link.to_string(),
        ];
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn write_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    w.write_all(to_csv(rows).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let spec = parse_config_str("{}").unwrap();
        assert_eq!(spec.base, SystemConfig::default());
        assert_eq!(spec.schemes, vec![Scheme::MMSE_OPT]);
        assert!(spec.sweep.is_none());
    }

    #[test]
    fn gigabits_convert_to_bits_per_channel_use() {
        let spec = parse_config_str(r#"{"C_F_gbps": 10}"#).unwrap();
        assert!((spec.base.fronthaul_bits - 100.0).abs() < 1e-12);
        assert!(parse_config_str(r#"{"C_F_gbps": 10, "C_F_bits": 3}"#).is_err());
    }

    #[test]
    fn indivisible_ap_count_is_rejected() {
        let err = parse_config_str(r#"{"M": 3, "total_aps": 32}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
        let spec = parse_config_str(r#"{"M": 4, "total_aps": 32}"#).unwrap();
        assert_eq!(spec.base.aps_per_stripe, 8);
    }

    #[test]
    fn unknown_keys_and_syntax_errors_are_located() {
        match parse_config_str("{\n  \"M\": 2,\n  \"bogus\": 1\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_config_str("{\n\"M\": 2,,\n}") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweeping_stripes_keeps_the_ap_count() {
        let spec =
            parse_config_str(r#"{"M": 1, "L": 8, "sweep_axis": "M", "sweep_values": [1, 2, 4]}"#)
                .unwrap();
        let ls: Vec<usize> = spec
            .points()
            .into_iter()
            .map(|p| spec.config_at(p).unwrap().aps_per_stripe)
            .collect();
        assert_eq!(ls, vec![8, 4, 2]);
        assert!(
            parse_config_str(r#"{"M": 1, "L": 8, "sweep_axis": "M", "sweep_values": [3]}"#)
                .is_err()
        );
        assert!(parse_config_str(r#"{"sweep_axis": "C_F", "sweep_values": []}"#).is_err());
    }

    #[test]
    fn trial_seeds_differ_and_are_stable() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    }

    #[test]
    fn csv_has_the_stable_columns() {
        let mut spec = ExperimentSpec {
            base: SystemConfig::desk(1, 2, 2, 2, 4.0),
            total_aps: 2,
            ..ExperimentSpec::default()
        };
        spec.base.trials = 2;
        spec.schemes = vec![Scheme::MMSE_OPT, Scheme::MRC_NAIVE];
        let rows = run_experiment(&spec).unwrap();
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with(
            "sweep_axis,sweep_value,scheme,hybrid,mean_sum_rate,std_sum_rate,mean_cutset,mean_fh_rate,overhead_reals,trials,seed"
        ));
        assert_eq!(lines.count(), 2);
        assert_eq!(csv, to_csv(&run_experiment(&spec).unwrap()));
    }
}
