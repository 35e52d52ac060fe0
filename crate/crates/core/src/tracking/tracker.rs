//! Bounding-box tracking of users between beam scans and identity
//! recalibration from radio context.

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::assignment::hungarian;
use super::kalman::{polar_measurement_cov, Kalman};
use crate::context::UserContext;
use crate::geometry::Point2;
use crate::radar::{resolution_params, Peak, RadarConfig, RangeAngleMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub sigma_a: f64,
    pub bbox_half_extent: f64,
    /// Detection threshold above the de-cluttered noise floor, dB.
    pub detection_margin_db: f64,
    pub max_misses: usize,
    /// Position standard deviation assigned to a radio context, m.
    pub recal_sigma: f64,
    pub init_velocity_sigma: f64,
    /// Peaks this much weaker than a stronger peak within `sidelobe_radius`
    /// are treated as its sidelobes.
    pub sidelobe_db: f64,
    pub sidelobe_radius: f64,
    pub blocker_gate: f64,
    pub blocker_min_hits: usize,
    pub blocker_min_speed: f64,
    pub blocker_max_misses: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            sigma_a: 0.5,
            bbox_half_extent: 1.5,
            detection_margin_db: 13.0,
            max_misses: 5,
            recal_sigma: 0.15,
            init_velocity_sigma: 1.0,
            sidelobe_db: 25.0,
            sidelobe_radius: 2.5,
            blocker_gate: 1.0,
            blocker_min_hits: 3,
            blocker_min_speed: 0.25,
            blocker_max_misses: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub user_id: usize,
    pub kf: Kalman,
    pub bbox_center: Point2,
    pub bbox_half_extent: f64,
    pub last_update: f64,
    pub misses: usize,
}

impl Track {
    pub fn new(user_id: usize, position: Point2, t: f64, cfg: &TrackerConfig) -> Self {
        let pv = cfg.recal_sigma * cfg.recal_sigma;
        let vv = cfg.init_velocity_sigma * cfg.init_velocity_sigma;
        Track {
            user_id,
            kf: Kalman::new(position, Point2::ORIGIN, pv, vv),
            bbox_center: position,
            bbox_half_extent: cfg.bbox_half_extent,
            last_update: t,
            misses: 0,
        }
    }

    /// `(x, y, vx, vy)`
    pub fn state(&self) -> Vector4<f64> {
        self.kf.x
    }

    pub fn covariance(&self) -> Matrix4<f64> {
        self.kf.p
    }

    pub fn position(&self) -> Point2 {
        self.kf.position()
    }

    pub fn velocity(&self) -> Point2 {
        self.kf.velocity()
    }

    pub fn in_box(&self, p: Point2) -> bool {
        let d = p - self.bbox_center;
        d.x.abs() <= self.bbox_half_extent && d.y.abs() <= self.bbox_half_extent
    }

    /// Direct-path departure angle from the base station at the origin.
    pub fn direct_angle(&self) -> f64 {
        self.position().angle_from(Point2::ORIGIN)
    }
}

fn cell_position(map: &RangeAngleMap, i: usize, j: usize, mount: Point2) -> Point2 {
    RangeAngleMap::to_global(map.range_axis[i], map.angle_axis[j], mount)
}

/// Strongest cell of `map` whose center falls inside the square box.
fn strongest_in_box(map: &RangeAngleMap, center: Point2, half: f64, mount: Point2) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..map.n_range {
        for j in 0..map.n_angle {
            let p = map.power(i, j);
            if best.is_some_and(|b| p <= b.2) {
                continue;
            }
            let d = cell_position(map, i, j, mount) - center;
            if d.x.abs() <= half && d.y.abs() <= half {
                best = Some((i, j, p));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Measurement in global coordinates with its covariance.
fn measurement(peak: &Peak, radar: &RadarConfig) -> (Point2, Matrix2<f64>) {
    let res = resolution_params(radar);
    let z = RangeAngleMap::to_global(peak.range, peak.angle, radar.mount_offset);
    (z, polar_measurement_cov(peak.range.max(res.range_res), peak.angle, res.range_res, res.angle_res_deg))
}

/// One radar frame of tracking: predict, search each box for its strongest
/// peak, update or coast.
pub fn track_step(tracks: &[Track], decluttered: &RangeAngleMap, t: f64, radar: &RadarConfig, cfg: &TrackerConfig) -> Vec<Track> {
    let threshold = decluttered.noise_floor_db + cfg.detection_margin_db;
    tracks
        .iter()
        .map(|tr| {
            let mut tr = *tr;
            tr.kf.predict(t - tr.last_update, cfg.sigma_a);
            tr.last_update = t;
            let center = tr.kf.position();
            let hit = strongest_in_box(decluttered, center, tr.bbox_half_extent, radar.mount_offset)
                .filter(|&(i, j)| decluttered.power(i, j) >= threshold);
            match hit {
                Some((i, j)) => {
                    let (z, r) = measurement(&decluttered.refine(i, j), radar);
                    tr.kf.update(z, r);
                    tr.misses = 0;
                }
                None => tr.misses += 1,
            }
            tr.bbox_center = tr.kf.position();
            tr
        })
        .collect()
}

/// Re-anchors track identities to radio contexts by optimal assignment.
pub fn recalibrate(tracks: &[Track], contexts: &[UserContext], t: f64, cfg: &TrackerConfig) -> Vec<Track> {
    let mut tracks: Vec<Track> = tracks.to_vec();
    tracks.sort_by_key(|tr| tr.user_id);
    let mut ctx: Vec<UserContext> = contexts.to_vec();
    ctx.sort_by_key(|c| c.user_id);

    let cost: Vec<Vec<f64>> = tracks
        .iter()
        .map(|tr| ctx.iter().map(|c| tr.position().distance(c.position())).collect())
        .collect();
    let assignment = if ctx.is_empty() { vec![None; tracks.len()] } else { hungarian(&cost) };

    let r = Matrix2::identity() * cfg.recal_sigma * cfg.recal_sigma;
    let mut out = Vec::with_capacity(ctx.len().max(tracks.len()));
    let mut matched_ctx = vec![false; ctx.len()];
    for (tr, a) in tracks.iter().zip(&assignment) {
        let Some(c_idx) = *a else { continue };
        matched_ctx[c_idx] = true;
        let c = &ctx[c_idx];
        let z = c.position();
        let mut tr = *tr;
        tr.kf.predict(t - tr.last_update, cfg.sigma_a);
        if tr.kf.position().distance(z) > tr.bbox_half_extent {
            tr = Track::new(c.user_id, z, t, cfg);
        } else {
            // the radio fix re-anchors the position; radar frames between
            // scans may have drifted the filter while staying confident
            tr.kf.x[0] = z.x;
            tr.kf.x[1] = z.y;
            for i in 0..2 {
                for j in 0..4 {
                    tr.kf.p[(i, j)] = 0.0;
                    tr.kf.p[(j, i)] = 0.0;
                }
            }
            tr.kf.p.fixed_view_mut::<2, 2>(0, 0).copy_from(&r);
            tr.user_id = c.user_id;
        }
        tr.last_update = t;
        tr.misses = 0;
        tr.bbox_center = tr.kf.position();
        out.push(tr);
    }
    for (c, _) in ctx.iter().zip(&matched_ctx).filter(|(_, m)| !**m) {
        out.push(Track::new(c.user_id, c.position(), t, cfg));
    }
    for (tr, a) in tracks.iter().zip(&assignment) {
        if a.is_none() && tr.misses <= cfg.max_misses && !out.iter().any(|o| o.user_id == tr.user_id) {
            out.push(*tr);
        }
    }
    out.sort_by_key(|tr| tr.user_id);
    out
}

/// Peaks above the detection threshold in global coordinates, with
/// sidelobes of stronger peaks removed.
pub fn detections(map: &RangeAngleMap, radar: &RadarConfig, cfg: &TrackerConfig) -> Vec<(Point2, Peak)> {
    let threshold = map.noise_floor_db + cfg.detection_margin_db;
    let mut kept: Vec<(Point2, Peak)> = Vec::new();
    for peak in map.peaks(threshold) {
        let p = RangeAngleMap::to_global(peak.range, peak.angle, radar.mount_offset);
        let masked = kept
            .iter()
            .any(|(q, k)| q.distance(p) <= cfg.sidelobe_radius && k.power_db - peak.power_db >= cfg.sidelobe_db);
        if !masked {
            kept.push((p, peak));
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{range_angle_map, synthesize_scatterers, Scatterer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn map_of(targets: &[Point2], t: f64, seed: u64) -> RangeAngleMap {
        let cfg = RadarConfig { noise_floor_dbm: -140.0, ..RadarConfig::default() };
        let s: Vec<Scatterer> = targets.iter().map(|&position| Scatterer { position, rcs: 1.0 }).collect();
        let mut m = range_angle_map(&synthesize_scatterers(&s, t, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)), &cfg).unwrap();
        // detection threshold at the default noise floor
        m.noise_floor_db = crate::radar::MapProcessor::new(&RadarConfig::default()).noise_floor_db();
        m
    }

    fn ctx(id: usize, p: Point2) -> UserContext {
        UserContext {
            user_id: id,
            angle: p.angle_from(Point2::ORIGIN),
            distance: p.norm(),
            timestamp: 0.0,
            coarse_distance: p.norm(),
            radar_confirmed: true,
        }
    }

    #[test]
    fn follows_walking_user() {
        let cfg = TrackerConfig::default();
        let radar = RadarConfig::default();
        let start = Point2::new(-1.0, 5.0);
        let mut tracks = vec![Track::new(1, start, 0.0, &cfg)];
        let mut truth = start;
        for k in 1..=10 {
            let t = 0.2 * k as f64;
            truth = start + Point2::new(t, 0.0);
            tracks = track_step(&tracks, &map_of(&[truth], t, k), t, &radar, &cfg);
        }
        let res = resolution_params(&radar).range_res;
        assert!(tracks[0].position().distance(truth) <= res, "{:?} vs {truth:?}", tracks[0].position());
        assert_eq!(tracks[0].misses, 0);
    }

    #[test]
    fn empty_box_coasts() {
        let cfg = TrackerConfig::default();
        let radar = RadarConfig::default();
        let mut tr = Track::new(1, Point2::new(0.0, 5.0), 0.0, &cfg);
        tr.kf.x[2] = 0.5;
        let mut tracks = vec![tr];
        let mut trace = tr.kf.p.trace();
        for k in 1..=3 {
            let t = 0.2 * k as f64;
            tracks = track_step(&tracks, &map_of(&[], t, k), t, &radar, &cfg);
            assert!(tracks[0].kf.p.trace() > trace);
            trace = tracks[0].kf.p.trace();
            assert!((tracks[0].position().x - 0.5 * t).abs() < 1e-12);
            assert_eq!(tracks[0].misses, k as usize);
        }
    }

    #[test]
    fn exact_contexts_keep_labels() {
        let cfg = TrackerConfig::default();
        let a = Point2::new(-2.0, 5.0);
        let b = Point2::new(2.0, 6.0);
        let tracks = vec![Track::new(1, a, 0.0, &cfg), Track::new(2, b, 0.0, &cfg)];
        let out = recalibrate(&tracks, &[ctx(2, b), ctx(1, a)], 0.0, &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].user_id, 1);
        assert!(out[0].position().distance(a) < 1e-9);
        assert!(out[1].position().distance(b) < 1e-9);
    }

    #[test]
    fn swapped_labels_are_corrected() {
        let cfg = TrackerConfig::default();
        let a = Point2::new(-2.0, 5.0);
        let b = Point2::new(2.0, 6.0);
        let tracks = vec![Track::new(2, a, 0.0, &cfg), Track::new(1, b, 0.0, &cfg)];
        let out = recalibrate(&tracks, &[ctx(1, a), ctx(2, b)], 0.0, &cfg);
        assert!(out[0].user_id == 1 && out[0].position().distance(a) < 1e-9);
    }

    #[test]
    fn extra_track_coasts() {
        let cfg = TrackerConfig::default();
        let p = [Point2::new(-2.0, 5.0), Point2::new(0.0, 4.0), Point2::new(2.0, 6.0)];
        let tracks: Vec<_> = p.iter().enumerate().map(|(i, &q)| Track::new(i + 1, q, 0.0, &cfg)).collect();
        let out = recalibrate(&tracks, &[ctx(1, p[0] + Point2::new(0.1, 0.0)), ctx(3, p[2])], 0.0, &cfg);
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].user_id, 2);
        assert_eq!(out[1].position(), p[1]);
    }

    #[test]
    fn near_context_reanchors_and_keeps_velocity() {
        let cfg = TrackerConfig::default();
        let mut tr = Track::new(1, Point2::new(-2.0, 5.0), 0.0, &cfg);
        tr.kf.x[2] = 1.0;
        let fix = Point2::new(-1.2, 5.3);
        let out = recalibrate(&[tr], &[ctx(1, fix)], 0.5, &cfg);
        assert!(out[0].position().distance(fix) < 1e-9);
        assert!((out[0].velocity().x - 1.0).abs() < 1e-9);
        assert!((out[0].kf.p[(0, 0)] - cfg.recal_sigma.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn far_context_resets_track() {
        let cfg = TrackerConfig::default();
        let mut tr = Track::new(1, Point2::new(-2.0, 5.0), 0.0, &cfg);
        tr.kf.x[2] = 1.0;
        let target = Point2::new(2.0, 5.0);
        let out = recalibrate(&[tr], &[ctx(1, target)], 0.0, &cfg);
        assert!(out[0].position().distance(target) < 1e-9);
        assert_eq!(out[0].velocity(), Point2::ORIGIN);
    }

    #[test]
    fn new_context_spawns_track() {
        let cfg = TrackerConfig::default();
        let out = recalibrate(&[], &[ctx(4, Point2::new(1.0, 3.0))], 0.0, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox_half_extent, 1.5);
    }

    #[test]
    fn sidelobes_masked() {
        let cfg = TrackerConfig::default();
        let radar = RadarConfig::default();
        let m = map_of(&[Point2::new(0.0, 2.5), Point2::new(3.0, 9.0)], 0.0, 1);
        let d = detections(&m, &radar, &cfg);
        assert_eq!(d.len(), 2, "{:?}", d.iter().map(|x| x.0).collect::<Vec<_>>());
    }
}
