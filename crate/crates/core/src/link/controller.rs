//! Per-strategy beam selection and throughput accounting.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::snr::{capacity_mbps, received_power, to_db, BeamDecision, ChannelState};
use crate::blockage::{mitigate, BlockageEvent, CandidatePath};
use crate::context::ReflectorEstimate;
use crate::error::Error;
use crate::geometry::Point2;
use crate::radio::{beam_response, steering_vector};
use crate::scene::PathKind;
use crate::tracking::reflected_angle_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Oracle,
    CommradSingle,
    CommradMulti,
    NonCollaborative,
    Reactive,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Oracle,
        Strategy::CommradSingle,
        Strategy::CommradMulti,
        Strategy::NonCollaborative,
        Strategy::Reactive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Oracle => "oracle",
            Strategy::CommradSingle => "commrad_single",
            Strategy::CommradMulti => "commrad_multi",
            Strategy::NonCollaborative => "non_collaborative",
            Strategy::Reactive => "reactive",
        }
    }

    /// Uses radar tracks between scans.
    pub fn uses_tracking(self) -> bool {
        matches!(self, Strategy::CommradSingle | Strategy::CommradMulti | Strategy::NonCollaborative)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathUsed {
    Direct,
    Reflected(usize),
    Multi,
    Outage,
}

impl fmt::Display for PathUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathUsed::Direct => write!(f, "direct"),
            PathUsed::Reflected(i) => write!(f, "reflected({i})"),
            PathUsed::Multi => write!(f, "multi"),
            PathUsed::Outage => write!(f, "outage"),
        }
    }
}

impl From<PathKind> for PathUsed {
    fn from(k: PathKind) -> Self {
        match k {
            PathKind::Direct => PathUsed::Direct,
            PathKind::Reflected(i) => PathUsed::Reflected(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub t: f64,
    pub user_id: usize,
    pub strategy: Strategy,
    pub snr_db: f64,
    pub throughput_mbps: f64,
    pub in_overhead: bool,
    pub path_used: PathUsed,
    pub angle_error_deg: f64,
    pub rss_dbm: f64,
    /// Ground truth: the direct path is blocked at `t`.
    pub direct_blocked: bool,
}

impl ThroughputSample {
    pub const CSV_HEADER: &'static str =
        "t,user_id,strategy,snr_db,throughput_mbps,in_overhead,path_used,angle_error_deg,rss_dbm,direct_blocked";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.user_id,
            self.strategy,
            self.snr_db,
            self.throughput_mbps,
            self.in_overhead,
            self.path_used,
            self.angle_error_deg,
            self.rss_dbm,
            self.direct_blocked
        )
    }
}

/// What a strategy knows about one user at a timestep.
#[derive(Debug, Clone, Copy)]
pub struct UserView<'a> {
    /// Tracked position, for tracking strategies.
    pub position: Option<Point2>,
    /// Beam angle from the most recent scan.
    pub scan_angle: Option<f64>,
    pub reflectors: &'a [ReflectorEstimate],
    pub events: &'a [BlockageEvent],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub n_antennas: usize,
    pub comm_bandwidth: f64,
    pub codebook: Vec<f64>,
    pub mitigation: bool,
    pub lead: f64,
    /// Airtime share lost to beam training for this strategy.
    pub overhead: f64,
}

/// Candidate paths toward a tracked position: the direct path, then every
/// reflector whose specular point is inside its extent.
pub fn candidate_paths(position: Point2, reflectors: &[ReflectorEstimate]) -> Vec<CandidatePath> {
    let mut out = vec![CandidatePath { kind: PathKind::Direct, angle: position.angle_from(Point2::ORIGIN), strength: 1.0 }];
    for (i, r) in reflectors.iter().enumerate() {
        if let Some(angle) = reflected_angle_at(position, r) {
            // longer reflectors have been confirmed by more observations
            out.push(CandidatePath { kind: PathKind::Reflected(i), angle, strength: 0.5 * r.length() / (1.0 + r.length()) });
        }
    }
    out
}

/// Best codebook beam for the true channel.
fn best_codebook_angle(channel: &ChannelState, cfg: &ControllerConfig) -> f64 {
    // a(θ)ᴴ h = √N Σ g·response(θ, φ), and √N is common to every beam
    let gain = |a: f64| -> f64 {
        channel.paths.iter().map(|p| p.gain * beam_response(cfg.n_antennas, a, p.angle)).sum::<Complex64>().norm_sqr()
    };
    cfg.codebook
        .iter()
        .copied()
        .map(|a| (a, gain(a)))
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
        .0
}

/// Beams on the given angles, each co-phased with the channel response it
/// sees (ideal phase coherence).
fn coherent_beams(channel: &ChannelState, angles: &[f64], n: usize) -> BeamDecision {
    let h = channel.vector(n);
    let coeffs: Vec<Complex64> = angles
        .iter()
        .map(|&a| {
            let r: Complex64 = steering_vector(n, a).iter().zip(&h).map(|(ai, hi)| ai.conj() * hi).sum();
            r.conj()
        })
        .collect();
    BeamDecision::multi(angles, &coeffs)
}

/// One timestep for one user under `strategy`, evaluated on the true channel.
pub fn controller_step(
    strategy: Strategy,
    t: f64,
    user_id: usize,
    channel: &ChannelState,
    view: &UserView<'_>,
    in_overhead: bool,
    cfg: &ControllerConfig,
) -> (BeamDecision, ThroughputSample) {
    let n = cfg.n_antennas;
    let direct = channel.paths.iter().find(|p| p.kind == PathKind::Direct);
    let true_angle = direct.map_or(0.0, |p| p.angle);

    let (decision, used, estimate) = match strategy {
        Strategy::Oracle => {
            let used = channel.strongest().map_or(PathUsed::Outage, |p| p.kind.into());
            (BeamDecision::optimal(), used, Some(best_codebook_angle(channel, cfg)))
        }
        Strategy::Reactive => match view.scan_angle {
            Some(a) => (BeamDecision::single(a), PathUsed::Direct, Some(a)),
            None => (BeamDecision::single(0.0), PathUsed::Outage, None),
        },
        Strategy::CommradSingle | Strategy::CommradMulti | Strategy::NonCollaborative => {
            match view.position {
                None => match view.scan_angle {
                    Some(a) => (BeamDecision::single(a), PathUsed::Direct, Some(a)),
                    None => (BeamDecision::single(0.0), PathUsed::Outage, None),
                },
                Some(pos) => {
                    let cands = candidate_paths(pos, view.reflectors);
                    let direct_angle = cands[0].angle;
                    let best_reflected = cands[1..].iter().max_by(|a, b| a.strength.total_cmp(&b.strength));
                    if let (Strategy::CommradMulti, Some(r)) = (strategy, best_reflected) {
                        let angles = [direct_angle, r.angle];
                        (coherent_beams(channel, &angles, n), PathUsed::Multi, Some(direct_angle))
                    } else {
                        let choice = if cfg.mitigation {
                            mitigate(view.events, &cands, user_id, t, cfg.lead)
                        } else {
                            None
                        };
                        let (angle, kind) = match choice {
                            Some(c) => (c.path.angle, c.path.kind),
                            None => (direct_angle, PathKind::Direct),
                        };
                        (BeamDecision::single(angle), kind.into(), Some(direct_angle))
                    }
                }
            }
        }
    };

    let rx = received_power(channel, &decision, n);
    let s = rx / channel.noise_power;
    // snr is non-negative by construction
    let cap = capacity_mbps(s, cfg.comm_bandwidth).unwrap_or(0.0);
    let used = if s < 1.0 { PathUsed::Outage } else { used };
    let sample = ThroughputSample {
        t,
        user_id,
        strategy,
        snr_db: to_db(s),
        throughput_mbps: cap * (1.0 - cfg.overhead),
        in_overhead,
        path_used: used,
        angle_error_deg: estimate.map_or(180.0, |e| (e - true_angle).abs()),
        rss_dbm: to_db(rx),
        direct_blocked: direct.is_some_and(|p| p.blocked),
    };
    (decision, sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::snr::{optimal_snr, snr, ChannelPath};

    fn cfg() -> ControllerConfig {
        ControllerConfig {
            n_antennas: 8,
            comm_bandwidth: 400e6,
            codebook: (0..121).map(|i| -60.0 + i as f64).collect(),
            mitigation: true,
            lead: 0.1,
            overhead: 0.0,
        }
    }

    fn channel(user: Point2) -> ChannelState {
        ChannelState {
            paths: vec![ChannelPath {
                kind: PathKind::Direct,
                angle: user.angle_from(Point2::ORIGIN),
                gain: Complex64::from_polar(1e-4, 0.2),
                blocked: false,
            }],
            signal_power: 10.0,
            noise_power: 1.6e-8,
        }
    }

    #[test]
    fn static_user_all_strategies_agree() {
        let user = Point2::new(0.0, 5.0);
        let ch = channel(user);
        let view = UserView { position: Some(user), scan_angle: Some(0.0), reflectors: &[], events: &[] };
        let tp: Vec<f64> = Strategy::ALL
            .iter()
            .map(|&s| controller_step(s, 0.0, 1, &ch, &view, false, &cfg()).1.throughput_mbps)
            .collect();
        assert!(tp.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-6), "{tp:?}");
    }

    #[test]
    fn oracle_is_optimal() {
        let user = Point2::new(1.0, 5.0);
        let ch = channel(user);
        let view = UserView { position: Some(user), scan_angle: None, reflectors: &[], events: &[] };
        let (d, s) = controller_step(Strategy::Oracle, 0.0, 1, &ch, &view, false, &cfg());
        assert!((snr(&ch, &d, 8) - optimal_snr(&ch, 8)).abs() < 1e-9 * optimal_snr(&ch, 8));
        assert!(s.angle_error_deg <= 0.5);
    }

    #[test]
    fn unknown_strategy() {
        assert!(matches!("greedy".parse::<Strategy>(), Err(Error::UnknownStrategy(_))));
        assert_eq!("commrad_multi".parse::<Strategy>().unwrap(), Strategy::CommradMulti);
    }

    #[test]
    fn overhead_scales_throughput() {
        let user = Point2::new(0.0, 5.0);
        let ch = channel(user);
        let view = UserView { position: Some(user), scan_angle: None, reflectors: &[], events: &[] };
        let full = controller_step(Strategy::CommradSingle, 0.0, 1, &ch, &view, false, &cfg()).1;
        let c = ControllerConfig { overhead: 0.25, ..cfg() };
        let less = controller_step(Strategy::CommradSingle, 0.0, 1, &ch, &view, true, &c).1;
        assert!((less.throughput_mbps / full.throughput_mbps - 0.75).abs() < 1e-12);
    }
}
