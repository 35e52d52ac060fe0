//! The simulation loop.
//!
//! Time advances in fixed steps. At a radar frame boundary a frame is
//! synthesized, de-cluttered and used to step every track. At a scan
//! boundary the radio sweeps its codebook, contexts are acquired and tracks
//! are re-anchored. Blockage is predicted at frame boundaries and every
//! strategy is evaluated at every step on the true channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blockage::{blockage_region, predict_blockage, BlockageEvent};
use crate::context::{
    accumulate_reflector, acquire_user_context, estimate_paths, estimate_reflector_point, ReflectorEstimate, UserContext,
};
use crate::error::Result;
use crate::geometry::Point2;
use crate::link::{controller_step, overhead_fraction, ChannelPath, ChannelState, ControllerConfig, Strategy, UserView};
use crate::radar::{resolution_params, synthesize_frame, MapProcessor, RangeAngleMap};
use crate::radio::{run_beam_scan, scan_duration, BeamScanReport};
use crate::scene::{compute_paths, sample_scene, PathKind, Scene, SceneSnapshot};
use crate::tracking::{
    recalibrate, reflected_angle_at, specular_point_on, track_step, BlockerTracker, ClutterProfile, Track,
};

use super::config::ExperimentConfig;
use super::metrics::{MetricsLog, RecalMarker, TrackRecord};

const FRAME_STREAM: u64 = 1_000_000;
const SCAN_STREAM: u64 = 2_000_000;

/// Tracks and environment estimates of one sensing pipeline.
#[derive(Debug, Clone, Default)]
struct SensingState {
    tracks: Vec<Track>,
    history: Vec<(Point2, f64)>,
    reflectors: Vec<ReflectorEstimate>,
    events: Vec<BlockageEvent>,
}

impl SensingState {
    fn position_at(&self, user_id: usize, t: f64) -> Option<Point2> {
        self.tracks
            .iter()
            .find(|tr| tr.user_id == user_id)
            .map(|tr| tr.position() + tr.velocity() * (t - tr.last_update))
    }

    fn recalibrate(&mut self, contexts: &[UserContext], t: f64, cfg: &ExperimentConfig) {
        // without radar support the Friis range is too coarse to re-anchor
        // on, but the beam angle still is, unless the best beam went to a
        // reflection: keep the track's range if the bearing is close
        let angle_gate = resolution_params(&cfg.radar).angle_res_deg;
        let usable: Vec<UserContext> = contexts
            .iter()
            .filter_map(|c| match self.position_at(c.user_id, t) {
                Some(_) if c.radar_confirmed => Some(*c),
                Some(p) => ((p.angle_from(Point2::ORIGIN) - c.angle).abs() <= angle_gate).then(|| UserContext { distance: p.norm(), ..*c }),
                None => Some(*c),
            })
            .collect();
        self.tracks = recalibrate(&self.tracks, &usable, t, &cfg.tracker);
    }

    fn learn_reflectors(&mut self, report: &BeamScanReport, contexts: &[UserContext], bs: Point2, cfg: &ExperimentConfig) {
        for c in contexts.iter().filter(|c| c.radar_confirmed) {
            let Ok(paths) = estimate_paths(report, c.user_id, &cfg.radio, &cfg.context) else { continue };
            for p in paths.iter().filter(|p| !p.is_direct) {
                if let Ok(obs) = estimate_reflector_point(bs, c, p) {
                    self.history.push(obs);
                }
            }
        }
        self.reflectors = accumulate_reflector(&self.history, cfg.context.cluster_angle_deg, cfg.context.cluster_distance);
    }

    /// Replaces predictions for each (user, path, blocker) and drops the
    /// ones whose window has passed.
    fn predict(&mut self, blockers: &[Track], bs: Point2, t: f64, cfg: &ExperimentConfig) -> Vec<BlockageEvent> {
        let b = &cfg.blockage;
        let mut fresh = Vec::new();
        for tr in &self.tracks {
            let user = tr.position();
            let mut legs: Vec<(PathKind, Point2, Point2)> = vec![(PathKind::Direct, bs, user)];
            for (i, r) in self.reflectors.iter().enumerate() {
                if let Some(sp) = specular_point_on(user, r) {
                    if reflected_angle_at(user, r).is_some() {
                        legs.push((PathKind::Reflected(i), bs, sp));
                        legs.push((PathKind::Reflected(i), sp, user));
                    }
                }
            }
            for bl in blockers {
                for &(kind, a, z) in &legs {
                    let Ok(region) = blockage_region(a, z, b.region_width) else { continue };
                    if let Some(ev) = predict_blockage(bl, &region, b.blocker_length, t, b.horizon, tr.user_id, kind) {
                        // one event per path: the earliest leg contact
                        let dup = fresh.iter().position(|e: &BlockageEvent| e.path == kind && e.blocker_id == ev.blocker_id && e.user_id == ev.user_id);
                        match dup {
                            Some(i) if fresh[i].t_arrival > ev.t_arrival => fresh[i] = ev,
                            Some(_) => {}
                            None => fresh.push(ev),
                        }
                    }
                }
            }
        }
        self.events.retain(|e| {
            let (_, end) = e.window(b.lead);
            end >= t && !fresh.iter().any(|f| f.user_id == e.user_id && f.path == e.path && f.blocker_id == e.blocker_id)
        });
        self.events.extend(fresh.iter().copied());
        fresh
    }
}

fn context_for(
    report: &BeamScanReport,
    user_id: usize,
    decluttered: Option<&RangeAngleMap>,
    raw: Option<&RangeAngleMap>,
    cfg: &ExperimentConfig,
) -> Option<UserContext> {
    let acquire = |m: &RangeAngleMap| acquire_user_context(report, user_id, m, &cfg.radar, &cfg.radio, &cfg.context).ok();
    let first = decluttered.and_then(acquire);
    if first.is_some_and(|c| c.radar_confirmed) {
        return first;
    }
    match raw.and_then(acquire) {
        Some(c) if c.radar_confirmed => Some(c),
        other => first.or(other),
    }
}

fn channel_state(snapshot: &SceneSnapshot, user_id: usize, cfg: &ExperimentConfig) -> Result<ChannelState> {
    let paths = compute_paths(snapshot, user_id, cfg.radio.wavelength())?;
    Ok(ChannelState {
        paths: paths
            .iter()
            .map(|p| ChannelPath { kind: p.kind, angle: p.departure_angle, gain: p.effective_gain(), blocked: p.blocked })
            .collect(),
        signal_power: cfg.radio.tx_power_mw(),
        noise_power: cfg.radio.noise_power_mw(),
    })
}

/// Airtime share lost to beam training under `strategy`.
pub fn strategy_overhead(strategy: Strategy, cfg: &ExperimentConfig) -> Result<f64> {
    Ok(match (strategy, cfg.recal_period) {
        // idealized: knows the best beam without paying for it
        (Strategy::Oracle, _) => 0.0,
        // scans once at start-up
        (Strategy::NonCollaborative, _) | (_, None) => 0.0,
        (_, Some(p)) => overhead_fraction(p, scan_duration(&cfg.radio), cfg.radio.feedback_duration)?,
    })
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    cfg.validate()?;
    let scene = &cfg.scene;
    let dt = cfg.timestep;
    let frame_steps = cfg.steps_per(cfg.radar.frame_period);
    let scan_steps = cfg.recal_period.map(|p| cfg.steps_per(p));
    let n_steps = cfg.n_steps();

    let processor = MapProcessor::new(&cfg.radar);
    let mut profile: Option<ClutterProfile> = None;
    let mut raw_map: Option<RangeAngleMap> = None;
    let mut clean_map: Option<RangeAngleMap> = None;

    let has = |s: Strategy| cfg.strategies.contains(&s);
    let want_commrad = has(Strategy::CommradSingle) || has(Strategy::CommradMulti);
    let want_noncollab = has(Strategy::NonCollaborative);
    let mut commrad = SensingState::default();
    let mut noncollab = SensingState::default();
    let mut blockers = BlockerTracker::new();
    let mut scan_angle: Vec<(usize, f64)> = Vec::new();

    let mut log = MetricsLog::default();
    let mut controllers = Vec::with_capacity(cfg.strategies.len());
    for &s in &cfg.strategies {
        let overhead = strategy_overhead(s, cfg)?;
        log.overhead.push((s, overhead));
        controllers.push((
            s,
            ControllerConfig {
                n_antennas: cfg.radio.n_antennas,
                comm_bandwidth: cfg.radio.comm_bandwidth,
                codebook: cfg.radio.codebook(),
                mitigation: cfg.mitigation,
                lead: cfg.blockage.lead,
                overhead,
            },
        ));
    }

    let mut frame_k = 0u64;
    let mut scan_k = 0u64;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let snapshot = sample_scene(scene, t)?;
        let bs = snapshot.base_station;
        let is_frame = k % frame_steps == 0;

        if is_frame {
            let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
            rng.set_stream(FRAME_STREAM + frame_k);
            frame_k += 1;
            let frame = synthesize_frame(&snapshot, &cfg.radar, &mut rng);
            let map = processor.process(&frame)?;
            let prof = profile.get_or_insert_with(|| ClutterProfile::new(map.dims(), cfg.clutter_alpha));
            let clean = crate::tracking::remove_clutter(&map, prof)?;
            for st in [&mut commrad, &mut noncollab] {
                st.tracks = track_step(&st.tracks, &clean, t, &cfg.radar, &cfg.tracker);
            }
            let users = if want_commrad { &commrad.tracks } else { &noncollab.tracks };
            blockers.step(&clean, t, users, &cfg.radar, &cfg.tracker);
            if cfg.dump_frames {
                log.frames.push(frame);
            }
            raw_map = Some(map);
            clean_map = Some(clean);
        }

        let scan_now = k == 0 || scan_steps.is_some_and(|s| k % s == 0);
        let mut in_scan = false;
        if scan_now {
            in_scan = true;
            let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
            rng.set_stream(SCAN_STREAM + scan_k);
            let report = run_beam_scan(&snapshot, &cfg.radio, &mut rng)?;
            let contexts: Vec<UserContext> = snapshot
                .users
                .iter()
                .filter_map(|u| context_for(&report, u.user_id, clean_map.as_ref(), raw_map.as_ref(), cfg))
                .collect();
            scan_angle = report.users.iter().map(|u| (u.user_id, cfg.radio.codebook_angle(u.best_beam()))).collect();
            if want_commrad {
                commrad.recalibrate(&contexts, t, cfg);
                commrad.learn_reflectors(&report, &contexts, bs, cfg);
            }
            if want_noncollab && scan_k == 0 {
                noncollab.recalibrate(&contexts, t, cfg);
                noncollab.learn_reflectors(&report, &contexts, bs, cfg);
            }
            let primary = if want_commrad { &commrad } else { &noncollab };
            log.recalibrations.push(RecalMarker {
                t,
                tracks: primary.tracks.iter().map(|tr| (tr.user_id, tr.position())).collect(),
            });
            scan_k += 1;
        }

        if is_frame {
            let confirmed = blockers.confirmed(&cfg.tracker);
            if want_commrad {
                let fresh = commrad.predict(&confirmed, bs, t, cfg);
                log.events.extend(fresh);
            }
            if want_noncollab {
                let fresh = noncollab.predict(&confirmed, bs, t, cfg);
                if !want_commrad {
                    log.events.extend(fresh);
                }
            }
            let primary = if want_commrad { &commrad } else { &noncollab };
            for tr in &primary.tracks {
                let reflected = primary.reflectors.iter().find_map(|r| reflected_angle_at(tr.position(), r));
                log.track_log.push(TrackRecord {
                    t,
                    user_id: tr.user_id,
                    position: tr.position(),
                    direct_angle: tr.direct_angle(),
                    reflected_angle: reflected,
                    misses: tr.misses,
                });
            }
        }

        for u in &snapshot.users {
            let channel = channel_state(&snapshot, u.user_id, cfg)?;
            let scan = scan_angle.iter().find(|(id, _)| *id == u.user_id).map(|(_, a)| *a);
            for (s, ccfg) in &controllers {
                let view = match s {
                    Strategy::CommradSingle | Strategy::CommradMulti => UserView {
                        position: commrad.position_at(u.user_id, t),
                        scan_angle: scan,
                        reflectors: &commrad.reflectors,
                        events: &commrad.events,
                    },
                    Strategy::NonCollaborative => UserView {
                        position: noncollab.position_at(u.user_id, t),
                        scan_angle: scan,
                        reflectors: &noncollab.reflectors,
                        events: &noncollab.events,
                    },
                    _ => UserView { position: None, scan_angle: scan, reflectors: &[], events: &[] },
                };
                let charged = in_scan && !matches!(s, Strategy::Oracle) && !(*s == Strategy::NonCollaborative && k > 0);
                let (_, sample) = controller_step(*s, t, u.user_id, &channel, &view, charged, ccfg);
                log.samples.push(sample);
            }
        }
    }
    log.reflectors = if want_commrad { commrad.reflectors } else { noncollab.reflectors };
    Ok(log)
}

/// Runs every config in parallel; results keep the input order.
pub fn run_many(configs: &[ExperimentConfig]) -> Vec<Result<MetricsLog>> {
    configs.par_iter().map(run_scenario).collect()
}

/// Runs `base` once per scene, replacing its scene.
pub fn run_suite(base: &ExperimentConfig, scenes: &[Scene]) -> Result<MetricsLog> {
    let configs: Vec<ExperimentConfig> = scenes
        .iter()
        .map(|s| ExperimentConfig { scene: s.clone(), ..base.clone() })
        .collect();
    let logs = run_many(&configs).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricsLog::merge(logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios::builtin;

    #[test]
    fn sample_count_and_order() {
        let mut scene = builtin("reflector_walk", 3).unwrap();
        scene.duration = 2.0;
        let cfg = ExperimentConfig::new(scene);
        let log = run_scenario(&cfg).unwrap();
        assert_eq!(log.samples.len(), 200 * Strategy::ALL.len());
        assert!(log.samples.windows(2).all(|w| w[0].t <= w[1].t));
        for s in Strategy::ALL {
            assert_eq!(log.samples_for(s).count(), 200);
        }
        // scans at 0, 0.5, 1.0, 1.5
        let ts: Vec<f64> = log.recalibrations.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn overhead_per_strategy() {
        let cfg = ExperimentConfig::new(builtin("reflector_walk", 0).unwrap());
        assert_eq!(strategy_overhead(Strategy::Oracle, &cfg).unwrap(), 0.0);
        assert_eq!(strategy_overhead(Strategy::NonCollaborative, &cfg).unwrap(), 0.0);
        let o = strategy_overhead(Strategy::CommradSingle, &cfg).unwrap();
        assert!((o - 0.0024625 / 0.5).abs() < 1e-12);
    }
}
