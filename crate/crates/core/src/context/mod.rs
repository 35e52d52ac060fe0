//! Context acquisition: who is where, which paths exist and where the
//! reflecting surfaces are, from beam-scan reports and radar maps.

mod music;
mod reflector;

pub use music::{estimate_paths, PathEstimate};
pub use reflector::{accumulate_reflector, estimate_reflector_point, ReflectorEstimate};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Point2;
use crate::radar::{resolution_params, RadarConfig, RangeAngleMap};
use crate::radio::{BeamScanReport, RadioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    /// Radar detection threshold above the map noise floor, dB.
    pub detection_margin_db: f64,
    /// Range gate is `max(gate_bins · range_res, gate_fraction · coarse)`.
    pub gate_bins: f64,
    pub gate_fraction: f64,
    /// Angular gate around the radio angle; `None` uses the radar angle resolution.
    pub angle_gate_deg: Option<f64>,
    pub max_paths: usize,
    pub eigen_threshold_db: f64,
    pub peak_threshold_db: f64,
    pub angle_grid_deg: f64,
    pub delay_grid_s: f64,
    pub cluster_angle_deg: f64,
    pub cluster_distance: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            detection_margin_db: 13.0,
            gate_bins: 2.0,
            gate_fraction: 0.25,
            angle_gate_deg: None,
            max_paths: 3,
            eigen_threshold_db: 10.0,
            peak_threshold_db: 6.0,
            angle_grid_deg: 0.5,
            delay_grid_s: 1e-9,
            cluster_angle_deg: 10.0,
            cluster_distance: 0.5,
        }
    }
}

/// Angle and distance of one active user relative to the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserContext {
    pub user_id: usize,
    pub angle: f64,
    pub distance: f64,
    pub timestamp: f64,
    /// Distance obtained from RSS alone.
    pub coarse_distance: f64,
    /// False when no radar peak fell inside the gate.
    pub radar_confirmed: bool,
}

impl UserContext {
    pub fn position(&self) -> Point2 {
        Point2::from_polar(self.distance, self.angle)
    }
}

/// RSS at 1 m on an aligned beam, dBm.
pub fn reference_rss_1m(cfg: &RadioConfig) -> f64 {
    let fspl_1m = 20.0 * (4.0 * PI / cfg.wavelength()).log10();
    cfg.tx_power_dbm + 10.0 * (cfg.n_antennas as f64).log10() - fspl_1m + cfg.friis_calibration_db
}

/// Inverts free-space loss on an aligned beam.
pub fn friis_distance(rss_dbm: f64, cfg: &RadioConfig) -> f64 {
    10f64.powf((reference_rss_1m(cfg) - rss_dbm) / 20.0)
}

pub fn acquire_user_context(
    report: &BeamScanReport,
    user_id: usize,
    radar_map: &RangeAngleMap,
    radar_cfg: &RadarConfig,
    radio_cfg: &RadioConfig,
    cfg: &ContextConfig,
) -> Result<UserContext> {
    let scan = report.user(user_id)?;
    let best = scan.best_beam();
    let angle = radio_cfg.codebook_angle(best);
    let coarse = friis_distance(scan.rss[best], radio_cfg);
    let res = resolution_params(radar_cfg);
    let gate = (cfg.gate_bins * res.range_res).max(cfg.gate_fraction * coarse);
    let angle_gate = cfg.angle_gate_deg.unwrap_or(res.angle_res_deg);

    let threshold = radar_map.noise_floor_db + cfg.detection_margin_db;
    let mut best_peak: Option<(f64, f64)> = None;
    for p in radar_map.peaks(threshold) {
        let pos = RangeAngleMap::to_global(p.range, p.angle, radar_cfg.mount_offset);
        let (r, a) = (pos.norm(), pos.angle_from(Point2::ORIGIN));
        let (dr, da) = ((r - coarse).abs(), (a - angle).abs());
        if dr > gate || da > angle_gate {
            continue;
        }
        let score = (dr / gate).powi(2) + (da / angle_gate).powi(2);
        if best_peak.is_none_or(|(s, _)| score < s) {
            best_peak = Some((score, r));
        }
    }
    Ok(UserContext {
        user_id,
        angle,
        distance: best_peak.map_or(coarse, |(_, r)| r),
        timestamp: report.timestamp,
        coarse_distance: coarse,
        radar_confirmed: best_peak.is_some(),
    })
}

/// Maximizes a unimodal function on `[a, b]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
