//! Tracking of moving non-user objects that may block links.

use nalgebra::Matrix2;

use super::tracker::{detections, Track, TrackerConfig};
use crate::geometry::Point2;
use crate::radar::{resolution_params, RadarConfig, RangeAngleMap};
use crate::tracking::kalman::polar_measurement_cov;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockerTrack {
    /// `user_id` carries the blocker id.
    pub track: Track,
    pub hits: usize,
}

/// Nearest-neighbour tracker over de-cluttered detections that fall outside
/// every user box.
#[derive(Debug, Clone, Default)]
pub struct BlockerTracker {
    pub tracks: Vec<BlockerTrack>,
    next_id: usize,
}

impl BlockerTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, map: &RangeAngleMap, t: f64, users: &[Track], radar: &RadarConfig, cfg: &TrackerConfig) {
        let res = resolution_params(radar);
        let dets: Vec<Point2> = detections(map, radar, cfg)
            .into_iter()
            .map(|(p, _)| p)
            .filter(|p| !users.iter().any(|u| u.in_box(*p)))
            .collect();

        for bt in &mut self.tracks {
            bt.track.kf.predict(t - bt.track.last_update, cfg.sigma_a);
            bt.track.last_update = t;
        }
        // greedy nearest-neighbour association, closest pairs first
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, bt) in self.tracks.iter().enumerate() {
            for (di, d) in dets.iter().enumerate() {
                let dist = bt.track.position().distance(*d);
                if dist <= cfg.blocker_gate {
                    pairs.push((dist, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; self.tracks.len()];
        let mut det_used = vec![false; dets.len()];
        for (_, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let z = dets[di];
            let rel = z - radar.mount_offset;
            let r: Matrix2<f64> = polar_measurement_cov(rel.norm().max(res.range_res), rel.angle_from(Point2::ORIGIN), res.range_res, res.angle_res_deg);
            let bt = &mut self.tracks[ti];
            bt.track.kf.update(z, r);
            bt.track.misses = 0;
            bt.hits += 1;
            bt.track.bbox_center = bt.track.position();
        }
        for (ti, used) in track_used.iter().enumerate() {
            if !used {
                self.tracks[ti].track.misses += 1;
            }
        }
        self.tracks.retain(|bt| bt.track.misses <= cfg.blocker_max_misses);
        for (di, d) in dets.iter().enumerate() {
            if !det_used[di] {
                let mut track = Track::new(self.next_id, *d, t, cfg);
                track.bbox_half_extent = cfg.blocker_gate;
                self.tracks.push(BlockerTrack { track, hits: 1 });
                self.next_id += 1;
            }
        }
    }

    /// Tracks with enough hits that are currently moving.
    pub fn confirmed(&self, cfg: &TrackerConfig) -> Vec<Track> {
        self.tracks
            .iter()
            .filter(|bt| bt.hits >= cfg.blocker_min_hits && bt.track.misses == 0 && bt.track.velocity().norm() > cfg.blocker_min_speed)
            .map(|bt| bt.track)
            .collect()
    }
}
