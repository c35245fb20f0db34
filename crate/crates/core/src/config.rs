//! Scenario parameters and unit conversions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Fronthaul capacity in bits per channel use from a bit rate and the
/// signal bandwidth.
pub fn bits_per_channel_use(rate_bps: f64, bandwidth_hz: f64) -> f64 {
    rate_bps / bandwidth_hz
}

/// How APs of each stripe are laid out around the coverage disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// All APs evenly spaced on one circle (meant for a single stripe).
    Circle,
    /// Each stripe owns an angular sector; APs sit on the sector's leading
    /// radial spoke and along its arc.
    SectorLShape,
}

impl Placement {
    /// The layout used when none is requested: a circle for one stripe,
    /// sectors otherwise.
    pub fn default_for(stripes: usize) -> Self {
        if stripes == 1 {
            Placement::Circle
        } else {
            Placement::SectorLShape
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Placement::Circle => "circle",
            Placement::SectorLShape => "sector_l_shape",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of radio stripes (M).
    pub stripes: usize,
    /// APs per stripe (L).
    pub aps_per_stripe: usize,
    /// Antennas per AP (N).
    pub antennas: usize,
    /// Single-antenna UEs (K).
    pub ues: usize,
    /// Per-link fronthaul capacity, bits per channel use.
    pub fronthaul_bits: f64,
    /// Per-UE transmit (and pilot) power in mW, one entry per UE.
    pub ue_power_mw: Vec<f64>,
    /// Receiver noise power in mW.
    pub noise_mw: f64,
    pub bandwidth_hz: f64,
    pub coverage_radius_m: f64,
    /// Radius of the circle (or sector rim) carrying the APs.
    pub ap_radius_m: f64,
    /// Height difference between APs and UEs.
    pub ap_height_delta_m: f64,
    /// Angular spread of the local scattering model, radians.
    pub angular_spread_rad: f64,
    /// Antenna spacing in wavelengths.
    pub antenna_spacing: f64,
    /// Minimum Gauss-Hermite order; the order grows with the array aperture.
    pub quadrature_order: usize,
    pub placement: Placement,
    pub seed: u64,
    pub trials: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk(2, 4, 8, 4, 8.0)
    }
}

impl SystemConfig {
    /// Default physical parameters (50 mW UEs, -85 dBm noise, 100 MHz,
    /// 200 m disk, 15 degree spread, half-wavelength ULA) at the given size.
    pub fn desk(
        stripes: usize,
        aps_per_stripe: usize,
        antennas: usize,
        ues: usize,
        fronthaul_bits: f64,
    ) -> Self {
        Self {
            stripes,
            aps_per_stripe,
            antennas,
            ues,
            fronthaul_bits,
            ue_power_mw: vec![50.0; ues],
            noise_mw: dbm_to_mw(-85.0),
            bandwidth_hz: 100e6,
            coverage_radius_m: 200.0,
            ap_radius_m: 200.0,
            ap_height_delta_m: 5.0,
            angular_spread_rad: 15f64.to_radians(),
            antenna_spacing: 0.5,
            quadrature_order: 30,
            placement: Placement::default_for(stripes),
            seed: 0,
            trials: 100,
        }
    }

    /// Sets a uniform per-UE power.
    pub fn with_uniform_power_mw(mut self, p_mw: f64) -> Self {
        self.ue_power_mw = vec![p_mw; self.ues];
        self
    }

    /// Changes the stripe count, keeping the placement rule's default in
    /// step with it.
    pub fn with_stripes(mut self, stripes: usize, aps_per_stripe: usize) -> Self {
        self.stripes = stripes;
        self.aps_per_stripe = aps_per_stripe;
        self.placement = Placement::default_for(stripes);
        self
    }

    /// Changes the UE count, resizing the power vector with its first entry.
    pub fn with_ues(mut self, ues: usize) -> Self {
        let p = self.ue_power_mw.first().copied().unwrap_or(50.0);
        self.ues = ues;
        self.ue_power_mw = vec![p; ues];
        self
    }

    pub fn total_aps(&self) -> usize {
        self.stripes * self.aps_per_stripe
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.stripes == 0 || self.aps_per_stripe == 0 || self.antennas == 0 || self.ues == 0 {
            return bad("M, L, N and K must all be at least 1");
        }
        if !(self.fronthaul_bits > 0.0) || !self.fronthaul_bits.is_finite() {
            return bad("fronthaul capacity must be positive");
        }
        if self.ue_power_mw.len() != self.ues {
            return Err(Error::InvalidConfig(format!(
                "{} UE powers given for {} UEs",
                self.ue_power_mw.len(),
                self.ues
            )));
        }
        if self
            .ue_power_mw
            .iter()
            .any(|p| !(*p > 0.0) || !p.is_finite())
        {
            return bad("UE powers must be positive");
        }
        if !(self.noise_mw > 0.0) || !(self.bandwidth_hz > 0.0) {
            return bad("noise power and bandwidth must be positive");
        }
        if !(self.coverage_radius_m > 0.0)
            || !(self.ap_radius_m > 0.0)
            || self.ap_height_delta_m < 0.0
        {
            return bad("geometry radii must be positive and the height difference nonnegative");
        }
        if !(self.angular_spread_rad > 0.0) || !(self.antenna_spacing > 0.0) {
            return bad("angular spread and antenna spacing must be positive");
        }
        if self.quadrature_order < 2 {
            return bad("quadrature order must be at least 2");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        Ok(())
    }
}
