//! Monostatic FMCW radar: resolution formulas, frame synthesis from a scene
//! snapshot and range-angle processing.
//!
//! A frame is the virtual-array beat signal after chirp integration, one row
//! per virtual antenna and one column per fast-time sample. A scatterer at
//! range `r` contributes a beat tone at range bin `r / range_res`; the
//! inter-antenna phase is that of a half-wavelength uniform linear array.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, C0};
use crate::scene::SceneSnapshot;

/// Power assigned to cells with zero energy, dB.
pub const EMPTY_CELL_DB: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub carrier_freq: f64,
    pub bandwidth: f64,
    pub samples_per_chirp: usize,
    pub chirp_slope: f64,
    pub ramp_time: f64,
    pub chirp_duration: f64,
    pub chirps_per_frame: usize,
    pub frame_period: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Per-sample complex noise power of the integrated beat signal, dBm.
    pub noise_floor_dbm: f64,
    /// Radar phase center relative to the base station.
    pub mount_offset: Point2,
    /// Carried as a constant: not derivable from the chirp parameters.
    pub velocity_resolution: f64,
    /// Beat-tone amplitude of a 1 m² scatterer at 1 m, sqrt(mW).
    pub amplitude_at_1m: f64,
    /// Range bins beyond this distance are not processed.
    pub max_processing_range: f64,
    /// Number of angle bins spanning the field of view.
    pub angle_bins: usize,
    pub fov_deg: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            carrier_freq: 24e9,
            bandwidth: 200e6,
            samples_per_chirp: 1000,
            chirp_slope: 2e12,
            ramp_time: 100e-6,
            chirp_duration: 200e-6,
            chirps_per_frame: 200,
            frame_period: 200e-3,
            n_tx: 2,
            n_rx: 8,
            noise_floor_dbm: -90.0,
            mount_offset: Point2::new(0.15, 0.0),
            velocity_resolution: 0.75,
            amplitude_at_1m: 6e-4,
            max_processing_range: 30.0,
            angle_bins: 121,
            fov_deg: 60.0,
        }
    }
}

impl RadarConfig {
    pub fn n_virtual(&self) -> usize {
        self.n_tx * self.n_rx
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.carrier_freq
    }

    pub fn range_bins_processed(&self) -> usize {
        let r = resolution_params(self);
        ((self.max_processing_range / r.range_res).ceil() as usize + 1).min(self.samples_per_chirp)
    }

    pub fn angle_axis(&self) -> Vec<f64> {
        let n = self.angle_bins;
        (0..n)
            .map(|j| -self.fov_deg + 2.0 * self.fov_deg * j as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::config("radar.bandwidth", "must be > 0"));
        }
        if self.n_virtual() < 2 {
            return Err(Error::config("radar.n_tx", "need at least two virtual antennas"));
        }
        if self.samples_per_chirp < 2 {
            return Err(Error::config("radar.samples_per_chirp", "must be >= 2"));
        }
        if self.frame_period < self.chirps_per_frame as f64 * self.chirp_duration - 1e-12 {
            return Err(Error::config(
                "radar.frame_period",
                "shorter than chirps_per_frame * chirp_duration",
            ));
        }
        if self.angle_bins < 2 {
            return Err(Error::config("radar.angle_bins", "must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionParams {
    pub range_res: f64,
    pub max_range: f64,
    pub angle_res_deg: f64,
    pub velocity_res: f64,
}

/// Range resolution `c0/2B`, maximum range `N·c0/2B` and array angle
/// resolution `2/N_ant` radians.
pub fn resolution_params(cfg: &RadarConfig) -> ResolutionParams {
    let range_res = C0 / (2.0 * cfg.bandwidth);
    ResolutionParams {
        range_res,
        max_range: range_res * cfg.samples_per_chirp as f64,
        angle_res_deg: (2.0 / cfg.n_virtual() as f64).to_degrees(),
        velocity_res: cfg.velocity_resolution,
    }
}

/// Integrated beat signal of one frame: `[virtual antennas × samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    pub timestamp: f64,
    pub raw: DMatrix<Complex64>,
}

impl RadarFrame {
    pub fn zeros(cfg: &RadarConfig, timestamp: f64) -> Self {
        RadarFrame {
            timestamp,
            raw: DMatrix::zeros(cfg.n_virtual(), cfg.samples_per_chirp),
        }
    }

    /// Writes `{n_ant: u32, n_range: u32, timestamp: f64}` followed by
    /// row-major little-endian complex64 (f32 re, f32 im) samples.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (n_ant, n_range) = self.raw.shape();
        w.write_all(&(n_ant as u32).to_le_bytes())?;
        w.write_all(&(n_range as u32).to_le_bytes())?;
        w.write_all(&self.timestamp.to_le_bytes())?;
        for a in 0..n_ant {
            for s in 0..n_range {
                let z = self.raw[(a, s)];
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n_ant = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let n_range = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let timestamp = f64::from_le_bytes(b8);
        let mut raw = DMatrix::zeros(n_ant, n_range);
        for a in 0..n_ant {
            for s in 0..n_range {
                r.read_exact(&mut b4)?;
                let re = f32::from_le_bytes(b4);
                r.read_exact(&mut b4)?;
                let im = f32::from_le_bytes(b4);
                raw[(a, s)] = Complex64::new(re as f64, im as f64);
            }
        }
        Ok(RadarFrame { timestamp, raw })
    }
}

/// A point scatterer as seen by the radar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point2,
    pub rcs: f64,
}

/// Every radar-visible object in the snapshot: users, blockers, static clutter.
/// Reflector surfaces are not point scatterers and are not included.
pub fn scatterers(snapshot: &SceneSnapshot) -> Vec<Scatterer> {
    let mut out: Vec<Scatterer> = snapshot
        .users
        .iter()
        .map(|u| Scatterer { position: u.position, rcs: u.rcs })
        .collect();
    out.extend(snapshot.blockers.iter().map(|b| Scatterer { position: b.position, rcs: b.rcs }));
    out.extend(snapshot.static_clutter.iter().map(|c| Scatterer { position: c.position, rcs: c.rcs }));
    out
}

pub fn synthesize_frame<R: Rng + ?Sized>(snapshot: &SceneSnapshot, cfg: &RadarConfig, rng: &mut R) -> RadarFrame {
    synthesize_scatterers(&scatterers(snapshot), snapshot.t, cfg, rng)
}

pub fn synthesize_scatterers<R: Rng + ?Sized>(
    targets: &[Scatterer],
    timestamp: f64,
    cfg: &RadarConfig,
    rng: &mut R,
) -> RadarFrame {
    let res = resolution_params(cfg);
    let n_ant = cfg.n_virtual();
    let n = cfg.samples_per_chirp;
    let lambda = cfg.wavelength();
    let mut frame = RadarFrame::zeros(cfg, timestamp);

    for s in targets {
        let rel = s.position - cfg.mount_offset;
        let r = rel.norm();
        if !(r > 0.0) || r >= res.max_range {
            log::debug!("scatterer at {:?} outside radar range, dropped", s.position);
            continue;
        }
        let theta = rel.x.atan2(rel.y);
        let amp = cfg.amplitude_at_1m * s.rcs.sqrt() / (r * r);
        let carrier = Complex64::from_polar(amp, -4.0 * PI * r / lambda);
        let bin = r / res.range_res;
        let tone_step = Complex64::from_polar(1.0, 2.0 * PI * bin / n as f64);
        for a in 0..n_ant {
            let ant = carrier * Complex64::from_polar(1.0, -PI * a as f64 * theta.sin());
            let mut z = ant;
            for k in 0..n {
                frame.raw[(a, k)] += z;
                z *= tone_step;
                if k % 64 == 63 {
                    // re-anchor the recurrence to bound rounding drift
                    z = ant * Complex64::from_polar(1.0, 2.0 * PI * bin * (k + 1) as f64 / n as f64);
                }
            }
        }
    }

    let sigma = (10f64.powf(cfg.noise_floor_dbm / 10.0) / 2.0).sqrt();
    for a in 0..n_ant {
        for k in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            frame.raw[(a, k)] += Complex64::new(re * sigma, im * sigma);
        }
    }
    frame
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i + 1) as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Noise power gain of a normalized window: `Σw² / (Σw)²`.
fn noise_gain(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x * x).sum::<f64>() / (s * s)
}

/// Power image over range and angle, with the complex field kept for
/// coherent clutter cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAngleMap {
    pub timestamp: f64,
    pub n_range: usize,
    pub n_angle: usize,
    /// Row-major `[range][angle]`, dB re 1 mW.
    pub power_db: Vec<f64>,
    pub field: Vec<Complex64>,
    pub range_axis: Vec<f64>,
    pub angle_axis: Vec<f64>,
    /// Expected noise power per cell, dB.
    pub noise_floor_db: f64,
}

/// A detected local maximum with sub-bin refined coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub range_bin: usize,
    pub angle_bin: usize,
    /// Refined range from the radar phase center, m.
    pub range: f64,
    /// Refined angle from radar boresight, degrees.
    pub angle: f64,
    pub power_db: f64,
}

impl RangeAngleMap {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_angle + j
    }

    pub fn power(&self, i: usize, j: usize) -> f64 {
        self.power_db[self.index(i, j)]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_range, self.n_angle)
    }

    pub fn max_db(&self) -> f64 {
        self.power_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let k = self
            .power_db
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc })
            .0;
        (k / self.n_angle, k % self.n_angle)
    }

    /// Rebuilds `power_db` from `field`.
    pub fn refresh_power(&mut self) {
        self.power_db = self.field.iter().map(|z| to_db(z.norm_sqr())).collect();
    }

    /// Global position of a (range, angle) measurement taken at `mount_offset`.
    pub fn to_global(range: f64, angle_deg: f64, mount_offset: Point2) -> Point2 {
        mount_offset + Point2::from_polar(range, angle_deg)
    }

    fn is_local_max(&self, i: usize, j: usize) -> bool {
        let p = self.power(i, j);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii >= self.n_range as i64 || jj >= self.n_angle as i64 {
                    continue;
                }
                let q = self.power(ii as usize, jj as usize);
                // ties resolve toward the lower index
                if q > p || (q == p && (di < 0 || (di == 0 && dj < 0))) {
                    return false;
                }
            }
        }
        true
    }

    /// Refines the cell `(i, j)` by fitting a parabola through the dB values
    /// of its neighbors along each axis.
    pub fn refine(&self, i: usize, j: usize) -> Peak {
        let parabolic = |m: f64, c: f64, p: f64| {
            let d = m - 2.0 * c + p;
            if d.abs() < 1e-12 || !d.is_finite() {
                0.0
            } else {
                (0.5 * (m - p) / d).clamp(-0.5, 0.5)
            }
        };
        let c = self.power(i, j);
        let di = if i > 0 && i + 1 < self.n_range {
            parabolic(self.power(i - 1, j), c, self.power(i + 1, j))
        } else {
            0.0
        };
        let dj = if j > 0 && j + 1 < self.n_angle {
            parabolic(self.power(i, j - 1), c, self.power(i, j + 1))
        } else {
            0.0
        };
        let dr = if self.n_range > 1 { self.range_axis[1] - self.range_axis[0] } else { 0.0 };
        let da = self.angle_axis[1] - self.angle_axis[0];
        Peak {
            range_bin: i,
            angle_bin: j,
            range: self.range_axis[i] + di * dr,
            angle: self.angle_axis[j] + dj * da,
            power_db: c,
        }
    }

    /// All local maxima above `threshold_db`, strongest first.
    pub fn peaks(&self, threshold_db: f64) -> Vec<Peak> {
        let mut out = Vec::new();
        for i in 0..self.n_range {
            for j in 0..self.n_angle {
                if self.power(i, j) >= threshold_db && self.is_local_max(i, j) {
                    out.push(self.refine(i, j));
                }
            }
        }
        out.sort_by(|a, b| b.power_db.total_cmp(&a.power_db));
        out
    }
}

pub fn to_db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        EMPTY_CELL_DB
    }
}

/// Reusable FFT plan and steering tables for [`range_angle_map`].
pub struct MapProcessor {
    cfg: RadarConfig,
    fft: Arc<dyn Fft<f64>>,
    range_window: Vec<f64>,
    steering: Vec<Vec<Complex64>>,
    noise_floor_db: f64,
}

impl MapProcessor {
    pub fn new(cfg: &RadarConfig) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(cfg.samples_per_chirp);
        let range_window = hann(cfg.samples_per_chirp);
        let ant_window = hann(cfg.n_virtual());
        let ant_sum: f64 = ant_window.iter().sum();
        let steering = cfg
            .angle_axis()
            .iter()
            .map(|th| {
                let u = th.to_radians().sin();
                ant_window
                    .iter()
                    .enumerate()
                    .map(|(n, w)| Complex64::from_polar(w / ant_sum, PI * n as f64 * u))
                    .collect()
            })
            .collect();
        let noise = 10f64.powf(cfg.noise_floor_dbm / 10.0) * noise_gain(&range_window) * noise_gain(&ant_window);
        MapProcessor {
            cfg: cfg.clone(),
            fft,
            range_window,
            steering,
            noise_floor_db: to_db(noise),
        }
    }

    /// Expected noise power per map cell, dB.
    pub fn noise_floor_db(&self) -> f64 {
        self.noise_floor_db
    }

    pub fn process(&self, frame: &RadarFrame) -> Result<RangeAngleMap> {
        let cfg = &self.cfg;
        let (n_ant, n) = frame.raw.shape();
        if (n_ant, n) != (cfg.n_virtual(), cfg.samples_per_chirp) {
            return Err(Error::DimensionMismatch {
                expected: (cfg.n_virtual(), cfg.samples_per_chirp),
                got: (n_ant, n),
            });
        }
        let n_range = cfg.range_bins_processed();
        let wsum: f64 = self.range_window.iter().sum();
        let mut spectra = vec![vec![Complex64::new(0.0, 0.0); n_range]; n_ant];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (a, spec) in spectra.iter_mut().enumerate() {
            for (k, (b, w)) in buf.iter_mut().zip(&self.range_window).enumerate() {
                *b = frame.raw[(a, k)] * w;
            }
            self.fft.process(&mut buf);
            for (m, out) in spec.iter_mut().enumerate() {
                *out = buf[m] / wsum;
            }
        }
        let n_angle = self.steering.len();
        let mut field = vec![Complex64::new(0.0, 0.0); n_range * n_angle];
        for i in 0..n_range {
            for (j, sv) in self.steering.iter().enumerate() {
                field[i * n_angle + j] = sv.iter().zip(&spectra).map(|(w, s)| w * s[i]).sum();
            }
        }
        let res = resolution_params(cfg);
        let mut map = RangeAngleMap {
            timestamp: frame.timestamp,
            n_range,
            n_angle,
            power_db: Vec::new(),
            field,
            range_axis: (0..n_range).map(|i| i as f64 * res.range_res).collect(),
            angle_axis: cfg.angle_axis(),
            noise_floor_db: self.noise_floor_db,
        };
        map.refresh_power();
        Ok(map)
    }
}

/// Range FFT over fast time and a Hann-tapered DFT over the virtual array,
/// evaluated on the configured angle grid.
pub fn range_angle_map(frame: &RadarFrame, cfg: &RadarConfig) -> Result<RangeAngleMap> {
    MapProcessor::new(cfg).process(frame)
}
