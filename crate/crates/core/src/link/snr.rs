//! Narrowband array link model: beamforming weights, SNR, capacity and
//! beam-training overhead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::steering_vector;
use crate::scene::PathKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub kind: PathKind,
    pub angle: f64,
    /// Complex amplitude including any blockage loss.
    pub gain: Complex64,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub paths: Vec<ChannelPath>,
    /// Transmit power, mW.
    pub signal_power: f64,
    /// Receiver noise power, mW.
    pub noise_power: f64,
}

impl ChannelState {
    /// Array channel `h = Σ γ_ℓ a(φ_ℓ)`.
    pub fn vector(&self, n: usize) -> Vec<Complex64> {
        let mut h = vec![Complex64::new(0.0, 0.0); n];
        for p in &self.paths {
            for (hi, ai) in h.iter_mut().zip(steering_vector(n, p.angle)) {
                *hi += p.gain * ai;
            }
        }
        h
    }

    /// Strongest path by effective gain.
    pub fn strongest(&self) -> Option<&ChannelPath> {
        self.paths.iter().max_by(|a, b| a.gain.norm_sqr().total_cmp(&b.gain.norm_sqr()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMode {
    Single,
    Multi,
    /// Matched to the full channel vector.
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub angle: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamDecision {
    pub mode: BeamMode,
    pub beams: Vec<Beam>,
}

impl BeamDecision {
    pub fn single(angle: f64) -> Self {
        BeamDecision { mode: BeamMode::Single, beams: vec![Beam { angle, amplitude: 1.0, phase: 0.0 }] }
    }

    /// Beams toward `angles` with complex coefficients `coeffs`, normalized
    /// to unit total power.
    pub fn multi(angles: &[f64], coeffs: &[Complex64]) -> Self {
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let beams = angles
            .iter()
            .zip(coeffs)
            .map(|(&angle, c)| Beam {
                angle,
                amplitude: if norm > 0.0 { c.norm() / norm } else { 0.0 },
                phase: c.arg(),
            })
            .collect();
        BeamDecision { mode: BeamMode::Multi, beams }
    }

    /// Constructive multi-beam: each beam's amplitude matched
    /// to its path gain and its phase cancelling the path phase.
    pub fn matched(paths: &[ChannelPath]) -> Self {
        let angles: Vec<f64> = paths.iter().map(|p| p.angle).collect();
        let coeffs: Vec<Complex64> = paths.iter().map(|p| p.gain.conj()).collect();
        Self::multi(&angles, &coeffs)
    }

    pub fn optimal() -> Self {
        BeamDecision { mode: BeamMode::Optimal, beams: Vec::new() }
    }

    /// Unit-norm transmit weights `w`, applied as `wᵀh`.
    pub fn weights(&self, n: usize, channel: &ChannelState) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        match self.mode {
            BeamMode::Optimal => {
                for (wi, hi) in w.iter_mut().zip(channel.vector(n)) {
                    *wi = hi.conj();
                }
            }
            BeamMode::Single | BeamMode::Multi => {
                for b in &self.beams {
                    let c = Complex64::from_polar(b.amplitude, b.phase);
                    for (wi, ai) in w.iter_mut().zip(steering_vector(n, b.angle)) {
                        *wi += c * ai.conj();
                    }
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            w.iter_mut().for_each(|z| *z /= norm);
        }
        w
    }
}

/// Received signal power `|wᵀh|²·Ps`, mW.
pub fn received_power(channel: &ChannelState, decision: &BeamDecision, n: usize) -> f64 {
    if channel.paths.is_empty() {
        return 0.0;
    }
    let h = channel.vector(n);
    let w = decision.weights(n, channel);
    let y: Complex64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
    y.norm_sqr() * channel.signal_power
}

/// Linear SNR of the beamformed link; zero for an empty channel.
pub fn snr(channel: &ChannelState, decision: &BeamDecision, n: usize) -> f64 {
    received_power(channel, decision, n) / channel.noise_power
}

/// `‖h‖²·Ps/Pη`, the best any unit-power beamformer can do.
pub fn optimal_snr(channel: &ChannelState, n: usize) -> f64 {
    channel.vector(n).iter().map(|z| z.norm_sqr()).sum::<f64>() * channel.signal_power / channel.noise_power
}

pub fn capacity_mbps(snr_linear: f64, comm_bandwidth: f64) -> Result<f64> {
    if !(snr_linear >= 0.0) {
        return Err(Error::Domain(format!("snr must be >= 0, got {snr_linear}")));
    }
    Ok(comm_bandwidth * (1.0 + snr_linear).log2() / 1e6)
}

/// Share of airtime spent on beam training when scanning every `period`.
pub fn overhead_fraction(period: f64, scan: f64, feedback: f64) -> Result<f64> {
    if !(period > scan + feedback) {
        return Err(Error::Domain(format!(
            "recalibration period {period} s must exceed scan + feedback = {} s",
            scan + feedback
        )));
    }
    Ok((scan + feedback) / period)
}

pub fn to_db(x: f64) -> f64 {
    crate::radar::to_db(x)
}
