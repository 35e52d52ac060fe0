//! Base-station radio: analog beam codebook, beam-scan CSI/RSS synthesis
//! and scan timing.
//!
//! The array is an N-element half-wavelength ULA with its phase reference at
//! the array center, which makes the beam response to a plane wave real.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::C0;
use crate::radar::to_db;
use crate::scene::{compute_paths, Path, PathKind, SceneSnapshot};

/// Noise powers at or below this value are treated as noiseless.
pub const NOISELESS_DBM: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub carrier_freq: f64,
    pub n_antennas: usize,
    pub codebook_size: usize,
    /// Half field of view, degrees; the codebook spans `[-fov, fov]`.
    pub fov_deg: f64,
    pub symbol_duration: f64,
    pub n_subcarriers: usize,
    pub subcarrier_spacing: f64,
    pub comm_bandwidth: f64,
    pub tx_power_dbm: f64,
    /// Noise power per subcarrier sample, dBm.
    pub noise_power_dbm: f64,
    /// Report feedback time charged per beam scan, seconds.
    pub feedback_duration: f64,
    /// Added to the Friis prediction when inverting RSS to distance, dB.
    pub friis_calibration_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_freq: 28e9,
            n_antennas: 8,
            codebook_size: 121,
            fov_deg: 60.0,
            symbol_duration: 12.5e-6,
            n_subcarriers: 64,
            subcarrier_spacing: 480e3,
            comm_bandwidth: 400e6,
            tx_power_dbm: -3.0,
            noise_power_dbm: -78.0,
            feedback_duration: 0.95e-3,
            friis_calibration_db: 0.0,
        }
    }
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        C0 / self.carrier_freq
    }

    pub fn codebook_angle(&self, beam: usize) -> f64 {
        -self.fov_deg + 2.0 * self.fov_deg * beam as f64 / (self.codebook_size - 1) as f64
    }

    pub fn codebook(&self) -> Vec<f64> {
        (0..self.codebook_size).map(|b| self.codebook_angle(b)).collect()
    }

    /// Codebook index whose direction is closest to `angle_deg`.
    pub fn nearest_beam(&self, angle_deg: f64) -> usize {
        let step = 2.0 * self.fov_deg / (self.codebook_size - 1) as f64;
        (((angle_deg + self.fov_deg) / step).round().max(0.0) as usize).min(self.codebook_size - 1)
    }

    pub fn tx_power_mw(&self) -> f64 {
        10f64.powf(self.tx_power_dbm / 10.0)
    }

    pub fn noise_power_mw(&self) -> f64 {
        if self.noise_power_dbm <= NOISELESS_DBM {
            0.0
        } else {
            10f64.powf(self.noise_power_dbm / 10.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 {
            return Err(Error::config("radio.codebook_size", "must be >= 2"));
        }
        if self.n_subcarriers < 8 {
            return Err(Error::config("radio.n_subcarriers", "must be >= 8"));
        }
        if self.n_antennas < 1 {
            return Err(Error::config("radio.n_antennas", "must be >= 1"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 90.0) {
            return Err(Error::config("radio.fov_deg", "must be in (0, 90)"));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return Err(Error::config("radio.subcarrier_spacing", "must be > 0"));
        }
        if !(self.comm_bandwidth > 0.0) {
            return Err(Error::config("radio.comm_bandwidth", "must be > 0"));
        }
        if !(self.symbol_duration > 0.0) {
            return Err(Error::config("radio.symbol_duration", "must be > 0"));
        }
        Ok(())
    }
}

/// Center-referenced ULA steering vector, `a(φ)_n = exp(-jπ (n - c) sin φ)`.
pub fn steering_vector(n: usize, phi_deg: f64) -> Vec<Complex64> {
    let c = (n as f64 - 1.0) / 2.0;
    let u = phi_deg.to_radians().sin();
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    // the centered offsets are antisymmetric, so the upper half mirrors the lower
    for i in 0..n.div_ceil(2) {
        a[i] = Complex64::from_polar(1.0, -PI * (i as f64 - c) * u);
        a[n - 1 - i] = a[i].conj();
    }
    a
}

/// Signed array response `a(θ)ᴴ a(φ) / √N` of a beam steered to `theta_deg`
/// toward a plane wave at `phi_deg`. Real because of the centered reference.
pub fn beam_response(n: usize, theta_deg: f64, phi_deg: f64) -> f64 {
    beam_response_u(n, phi_deg.to_radians().sin() - theta_deg.to_radians().sin())
}

/// [`beam_response`] in sine space, `du = sin φ - sin θ`. The centered sum
/// `Σ cos(π(n-c)du)` is the Dirichlet kernel `sin(Nx/2)/sin(x/2)`, `x = π·du`.
pub fn beam_response_u(n: usize, du: f64) -> f64 {
    let half = 0.5 * PI * du;
    let den = half.sin();
    let sum = if den.abs() < 1e-9 { n as f64 * (n as f64 * half).cos() / half.cos() } else { (n as f64 * half).sin() / den };
    sum / (n as f64).sqrt()
}

/// Array-factor magnitude of codebook beam `beam` toward `phi_deg`.
pub fn beam_gain(cfg: &RadioConfig, beam: usize, phi_deg: f64) -> Result<f64> {
    if beam >= cfg.codebook_size {
        return Err(Error::NotFound { what: "beam", id: beam });
    }
    Ok(beam_response(cfg.n_antennas, cfg.codebook_angle(beam), phi_deg).abs())
}

pub fn scan_duration(cfg: &RadioConfig) -> f64 {
    cfg.codebook_size as f64 * cfg.symbol_duration
}

/// Channel path as seen by the radio: departure angle, complex gain
/// including blockage loss, and absolute time of flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioPath {
    pub kind: PathKind,
    pub angle: f64,
    pub gain: Complex64,
    pub tof: f64,
}

impl From<&Path> for RadioPath {
    fn from(p: &Path) -> Self {
        RadioPath { kind: p.kind, angle: p.departure_angle, gain: p.effective_gain(), tof: p.tof }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserScan {
    pub user_id: usize,
    /// Per-beam RSS, dBm.
    pub rss: Vec<f64>,
    /// `[beams × subcarriers]`, sqrt(mW).
    pub csi: DMatrix<Complex64>,
}

impl UserScan {
    pub fn best_beam(&self) -> usize {
        self.rss
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (b, &r)| if r > acc.1 { (b, r) } else { acc })
            .0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamScanReport {
    pub timestamp: f64,
    pub users: Vec<UserScan>,
}

impl BeamScanReport {
    pub fn user(&self, user_id: usize) -> Result<&UserScan> {
        self.users
            .iter()
            .find(|u| u.user_id == user_id)
            .ok_or(Error::NotFound { what: "user in beam-scan report", id: user_id })
    }
}

/// CSI for one user given its channel paths. Carrier phase is already part
/// of each path gain, so only the subcarrier offset term is applied here.
pub fn scan_paths<R: Rng + ?Sized>(
    user_id: usize,
    paths: &[RadioPath],
    cfg: &RadioConfig,
    rng: &mut R,
) -> UserScan {
    let nb = cfg.codebook_size;
    let nk = cfg.n_subcarriers;
    let amp_tx = cfg.tx_power_mw().sqrt();
    let mut csi = DMatrix::zeros(nb, nk);
    for p in paths {
        let step = Complex64::from_polar(1.0, -2.0 * PI * cfg.subcarrier_spacing * p.tof);
        for b in 0..nb {
            let g = beam_response(cfg.n_antennas, cfg.codebook_angle(b), p.angle);
            let mut z = p.gain * (g * amp_tx);
            for k in 0..nk {
                csi[(b, k)] += z;
                z *= step;
            }
        }
    }
    let noise = cfg.noise_power_mw();
    if noise > 0.0 {
        let sigma = (noise / 2.0).sqrt();
        for b in 0..nb {
            for k in 0..nk {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                csi[(b, k)] += Complex64::new(re * sigma, im * sigma);
            }
        }
    }
    let rss = (0..nb)
        .map(|b| to_db(csi.row(b).iter().map(|z: &Complex64| z.norm_sqr()).sum::<f64>() / nk as f64))
        .collect();
    UserScan { user_id, rss, csi }
}

/// Sweeps the whole codebook once; every user in the snapshot reports CSI.
pub fn run_beam_scan<R: Rng + ?Sized>(snapshot: &SceneSnapshot, cfg: &RadioConfig, rng: &mut R) -> Result<BeamScanReport> {
    let mut users = Vec::with_capacity(snapshot.users.len());
    for u in &snapshot.users {
        let paths: Vec<RadioPath> = compute_paths(snapshot, u.user_id, cfg.wavelength())?
            .iter()
            .map(RadioPath::from)
            .collect();
        users.push(scan_paths(u.user_id, &paths, cfg, rng));
    }
    Ok(BeamScanReport { timestamp: snapshot.t, users })
}
