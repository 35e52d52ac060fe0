//! Subspace estimation of path angles over the beam codebook and of
//! relative delays over subcarriers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{golden_max, ContextConfig};
use crate::error::{Error, Result};
use crate::radio::{beam_response, BeamScanReport, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub angle: f64,
    /// Delay relative to the direct path, seconds.
    pub rel_tof: f64,
    pub is_direct: bool,
    /// Mean received power of the separated path over subcarriers on an
    /// aligned beam, mW.
    pub power: f64,
}

/// Signal-subspace dimension: eigenvalues at least `threshold_db` above the
/// median eigenvalue, floored by numerical precision.
fn model_order(eigs: &[f64], threshold_db: f64, max: usize) -> usize {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2].max(0.0);
    let top = sorted.last().copied().unwrap_or(0.0);
    let noise = median.max(top * 1e-12);
    let k = 10f64.powf(threshold_db / 10.0);
    eigs.iter().filter(|&&e| e >= noise * k).count().min(max)
}

/// Eigenvalues in descending order and orthonormal eigenvectors of the
/// leading `k(eigenvalues)` of them. Only a few vectors are ever needed, so
/// they come from shifted inverse iteration rather than a full decomposition.
fn leading_eigen(m: &DMatrix<f64>, k: impl FnOnce(&[f64]) -> usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let k = k(&vals).min(n);
    let scale = vals.first().map_or(0.0, |v| v.abs()).max(f64::MIN_POSITIVE);
    let mut vecs: Vec<DVector<f64>> = Vec::with_capacity(k);
    for &lambda in &vals[..k] {
        let shifted = m - DMatrix::identity(n, n) * (lambda + 1e-10 * scale);
        let lu = shifted.lu();
        let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
        let mut ok = true;
        for _ in 0..4 {
            let Some(mut w) = lu.solve(&v) else {
                ok = false;
                break;
            };
            for u in &vecs {
                w -= u * u.dot(&w);
            }
            let norm = w.norm();
            if !(norm.is_finite() && norm > 0.0) {
                ok = false;
                break;
            }
            v = w / norm;
        }
        if !ok {
            return full_eigen(m, k);
        }
        vecs.push(v);
    }
    let vecs = if vecs.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&vecs) };
    (vals, vecs)
}

fn full_eigen(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<_> = idx[..k].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let vecs = if cols.is_empty() { DMatrix::zeros(m.nrows(), 0) } else { DMatrix::from_columns(&cols) };
    (vals, vecs)
}

/// MUSIC pseudospectrum over the codebook. Every beam response is a sum of
/// `cos(π·d·(u - u_b))` over the element offsets `d`, so it factors as
/// `C·f(u)` with `f(u) = [cos(π·d·u), sin(π·d·u)]`. Both the beamspace norm
/// and its noise-subspace residual become small quadratic forms in `f`.
struct AngleSpectrum {
    offsets: Vec<f64>,
    gram: DMatrix<f64>,
    residual: DMatrix<f64>,
}

impl AngleSpectrum {
    fn new(n_antennas: usize, codebook_u: &[f64], signal: &DMatrix<f64>) -> Self {
        let c = (n_antennas as f64 - 1.0) / 2.0;
        let offsets: Vec<f64> = (0..n_antennas).map(|i| PI * (i as f64 - c)).collect();
        let n = offsets.len();
        let basis = DMatrix::from_fn(codebook_u.len(), 2 * n, |b, j| {
            let x = offsets[j % n] * codebook_u[b];
            if j < n {
                x.cos()
            } else {
                x.sin()
            }
        });
        let outside = &basis - signal * (signal.transpose() * &basis);
        Self { gram: basis.transpose() * &basis, residual: outside.transpose() * &outside, offsets }
    }

    fn eval(&self, phi: f64) -> f64 {
        let u = phi.to_radians().sin();
        let n = self.offsets.len();
        let f = DVector::from_fn(2 * n, |j, _| {
            let x = self.offsets[j % n] * u;
            if j < n {
                x.cos()
            } else {
                x.sin()
            }
        });
        let total = f.dot(&(&self.gram * &f));
        let rest = f.dot(&(&self.residual * &f));
        let frac = if total > 0.0 { rest / total } else { 1.0 };
        1.0 / frac.max(1e-15)
    }
}

fn local_peaks(values: &[f64], threshold: f64) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let v = values[i];
            v >= threshold && (i == 0 || v > values[i - 1]) && (i + 1 == n || v >= values[i + 1])
        })
        .collect()
}

/// Least-squares separation of the per-subcarrier snapshots onto the
/// beamspace responses of the given angles: rows are per-path series.
fn separate(csi: &DMatrix<Complex64>, cfg: &RadioConfig, angles: &[f64]) -> Option<DMatrix<Complex64>> {
    let nb = cfg.codebook_size;
    let g = DMatrix::from_fn(nb, angles.len(), |b, l| {
        Complex64::new(beam_response(cfg.n_antennas, cfg.codebook_angle(b), angles[l]), 0.0)
    });
    let gh = g.adjoint();
    let gram = &gh * &g;
    let inv = gram.try_inverse()?;
    Some(inv * gh * csi)
}

/// MUSIC delay estimate of a single-path subcarrier series with forward
/// spatial smoothing.
fn estimate_delay(series: &[Complex64], spacing: f64, grid: f64) -> f64 {
    let k = series.len();
    let m = (k / 2).clamp(2, 32);
    let n_sub = k - m + 1;
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..n_sub {
        let v = DVector::from_column_slice(&series[i..i + m]);
        r += &v * v.adjoint();
    }
    r /= Complex64::new(n_sub as f64, 0.0);
    let eig = r.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let es = eig.eigenvectors.column(top).into_owned();
    let spectrum = |tau: f64| {
        let rot = Complex64::from_polar(1.0, -2.0 * PI * spacing * tau);
        let mut phasor = Complex64::new(1.0, 0.0);
        let mut dot = Complex64::new(0.0, 0.0);
        for e in es.iter() {
            dot += e.conj() * phasor;
            phasor *= rot;
        }
        1.0 / (1.0 - dot.norm_sqr() / m as f64).max(1e-15)
    };
    let period = 1.0 / spacing;
    let n_grid = (period / grid).floor() as i64;
    // The single-path peak spans about 2·n_grid/m cells; a coarse pass every
    // few cells lands on it, then the fine grid is scanned around that hit.
    let stride = (n_grid / (8 * m as i64)).max(1);
    let argmax = |range: &mut dyn Iterator<Item = i64>| {
        let mut best = (0i64, f64::NEG_INFINITY);
        for i in range {
            let v = spectrum(i as f64 * grid);
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    let coarse = argmax(&mut (0..n_grid).step_by(stride as usize));
    let fine = argmax(&mut (coarse - stride..=coarse + stride));
    let center = fine as f64 * grid;
    golden_max(spectrum, center - grid, center + grid, grid * 1e-4).rem_euclid(period)
}

/// Path angles and relative delays for one user's beam-scan report.
pub fn estimate_paths(report: &BeamScanReport, user_id: usize, radio: &RadioConfig, cfg: &ContextConfig) -> Result<Vec<PathEstimate>> {
    let scan = report.user(user_id)?;
    let csi = &scan.csi;
    let (nb, nk) = csi.shape();
    if nk < 2 {
        return Err(Error::EstimationFailed("need at least two subcarriers".into()));
    }
    if nb != radio.codebook_size {
        return Err(Error::DimensionMismatch { expected: (radio.codebook_size, radio.n_subcarriers), got: (nb, nk) });
    }

    // Beam responses are real, so conjugated snapshots obey the same model;
    // averaging both decorrelates coherent paths.
    let re = csi.map(|z| z.re);
    let im = csi.map(|z| z.im);
    let cov = (&re * re.transpose() + &im * im.transpose()) / nk as f64;
    let (_, signal) = leading_eigen(&cov, |eigs| model_order(eigs, cfg.eigen_threshold_db, cfg.max_paths));
    let order = signal.ncols();
    if order == 0 {
        return Err(Error::EstimationFailed("no signal eigenvalue above noise".into()));
    }
    let codebook_u: Vec<f64> = radio.codebook().iter().map(|a| a.to_radians().sin()).collect();
    let spec = AngleSpectrum::new(radio.n_antennas, &codebook_u, &signal);

    let step = cfg.angle_grid_deg;
    let n_grid = ((2.0 * radio.fov_deg) / step).round() as usize + 1;
    let grid: Vec<f64> = (0..n_grid).map(|i| -radio.fov_deg + i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&a| spec.eval(a)).collect();
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let threshold = sorted[sorted.len() / 2] * 10f64.powf(cfg.peak_threshold_db / 10.0);
    let mut peaks = local_peaks(&values, threshold);
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    peaks.truncate(order);
    if peaks.is_empty() {
        return Err(Error::EstimationFailed("no pseudospectrum peak above threshold".into()));
    }
    let angles: Vec<f64> = peaks
        .iter()
        .map(|&i| {
            let lo = (grid[i] - step).max(-radio.fov_deg);
            let hi = (grid[i] + step).min(radio.fov_deg);
            golden_max(|a| spec.eval(a), lo, hi, 1e-4)
        })
        .collect();

    let series = separate(csi, radio, &angles)
        .ok_or_else(|| Error::EstimationFailed("path responses are linearly dependent".into()))?;
    let n_ant = radio.n_antennas as f64;
    let mut est: Vec<(f64, f64, f64)> = angles
        .iter()
        .enumerate()
        .map(|(l, &angle)| {
            let row: Vec<Complex64> = series.row(l).iter().copied().collect();
            let tau = estimate_delay(&row, radio.subcarrier_spacing, cfg.delay_grid_s);
            let power = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / nk as f64 * n_ant;
            (angle, tau, power)
        })
        .collect();

    // Delays wrap at 1/Δf; unwrap relative to the earliest arrival.
    let period = 1.0 / radio.subcarrier_spacing;
    let tau_min = est.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    for e in &mut est {
        e.1 = (e.1 - tau_min).rem_euclid(period);
    }
    let cell = |t: f64| (t / cfg.delay_grid_s).round() as i64;
    let min_cell = est.iter().map(|e| cell(e.1)).min().unwrap_or(0);
    let direct = est
        .iter()
        .enumerate()
        .filter(|(_, e)| cell(e.1) == min_cell)
        .max_by(|a, b| a.1 .2.total_cmp(&b.1 .2))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let tau_direct = est[direct].1;
    let mut out: Vec<PathEstimate> = est
        .iter()
        .enumerate()
        .map(|(i, &(angle, tau, power))| PathEstimate {
            angle,
            rel_tof: if i == direct { 0.0 } else { (tau - tau_direct).max(0.0) },
            is_direct: i == direct,
            power,
        })
        .collect();
    out.sort_by(|a, b| b.is_direct.cmp(&a.is_direct).then(a.rel_tof.total_cmp(&b.rel_tof)));
    Ok(out)
}
