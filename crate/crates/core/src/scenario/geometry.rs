use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::config::{Placement, SystemConfig};
use crate::error::{Error, Result};

/// Positions in meters, angles in radians. AP vectors are stripe-major:
/// entry `m * L + i` is AP `(m, i)` (0-based), and `i` increases towards
/// the central processor at the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Geometry {
    pub stripes: usize,
    pub aps_per_stripe: usize,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Direction each ULA's broadside points at; the array axis is
    /// perpendicular to it.
    pub boresight: Vec<f64>,
}

impl Geometry {
    pub fn ap_index(&self, stripe: usize, ap: usize) -> usize {
        stripe * self.aps_per_stripe + ap
    }

    pub fn ap_position(&self, stripe: usize, ap: usize) -> [f64; 2] {
        self.ap_positions[self.ap_index(stripe, ap)]
    }

    /// Horizontal distance between AP `(stripe, ap)` and UE `ue`.
    pub fn horizontal_distance(&self, stripe: usize, ap: usize, ue: usize) -> f64 {
        let a = self.ap_position(stripe, ap);
        let u = self.ue_positions[ue];
        (u[0] - a[0]).hypot(u[1] - a[1])
    }

    /// Azimuth of UE `ue` measured from the broadside of AP `(stripe, ap)`.
    pub fn nominal_angle(&self, stripe: usize, ap: usize, ue: usize) -> f64 {
        let a = self.ap_position(stripe, ap);
        let u = self.ue_positions[ue];
        let azimuth = (u[1] - a[1]).atan2(u[0] - a[0]);
        wrap_angle(azimuth - self.boresight[self.ap_index(stripe, ap)])
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

fn polar(radius: f64, angle: f64) -> [f64; 2] {
    [radius * angle.cos(), radius * angle.sin()]
}

fn facing_center(p: [f64; 2]) -> f64 {
    (-p[1]).atan2(-p[0])
}

/// AP positions of every stripe in stripe-major order.
pub fn ap_layout(config: &SystemConfig) -> Vec<[f64; 2]> {
    let (m_count, l_count) = (config.stripes, config.aps_per_stripe);
    let rho = config.ap_radius_m;
    let mut out = Vec::with_capacity(m_count * l_count);
    match config.placement {
        Placement::Circle => {
            let total = (m_count * l_count) as f64;
            for n in 0..m_count * l_count {
                out.push(polar(rho, 2.0 * PI * n as f64 / total));
            }
        }
        Placement::SectorLShape => {
            let width = 2.0 * PI / m_count as f64;
            let on_spoke = l_count.div_ceil(2);
            let on_arc = l_count - on_spoke;
            for m in 0..m_count {
                let start = width * m as f64;
                // The cable runs from the far end of the arc back to the
                // spoke and then inwards to the processor at the center.
                for j in (1..=on_arc).rev() {
                    out.push(polar(rho, start + width * j as f64 / (on_arc + 1) as f64));
                }
                for j in (1..=on_spoke).rev() {
                    out.push(polar(rho * j as f64 / on_spoke as f64, start));
                }
            }
        }
    }
    out
}

/// Drops UEs uniformly on the coverage disk and lays out the APs.
pub fn place_network<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Geometry> {
    config.validate()?;
    let ue_positions = (0..config.ues)
        .map(|_| {
            let r = config.coverage_radius_m * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            polar(r, theta)
        })
        .collect();
    let ap_positions = ap_layout(config);
    let boresight = ap_positions.iter().copied().map(facing_center).collect();
    Ok(Geometry {
        stripes: config.stripes,
        aps_per_stripe: config.aps_per_stripe,
        ap_positions,
        ue_positions,
        boresight,
    })
}

/// Large-scale path loss in dB at 3-D distance `distance_m`.
pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    Ok(-30.5 - 36.7 * distance_m.log10())
}

/// Linear large-scale fading between AP `(stripe, ap)` and UE `ue`,
/// including the AP/UE height difference.
pub fn large_scale_fading(
    geometry: &Geometry,
    config: &SystemConfig,
    stripe: usize,
    ap: usize,
    ue: usize,
) -> Result<f64> {
    let d = geometry
        .horizontal_distance(stripe, ap, ue)
        .hypot(config.ap_height_delta_m);
    Ok(10f64.powf(pathloss_db(d)? / 10.0))
}
