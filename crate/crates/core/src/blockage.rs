//! Blockage-prone regions around links, blocker arrival prediction and
//! proactive path switching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{line_intersection, OrientedRect, Point2};
use crate::scene::PathKind;
use crate::tracking::Track;

pub const DEFAULT_REGION_WIDTH: f64 = 0.4;
pub const DEFAULT_HORIZON: f64 = 5.0;
pub const DEFAULT_LEAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockageConfig {
    pub region_width: f64,
    pub horizon: f64,
    pub lead: f64,
    /// Blocker length assumed for tracked objects, m.
    pub blocker_length: f64,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        BlockageConfig {
            region_width: DEFAULT_REGION_WIDTH,
            horizon: DEFAULT_HORIZON,
            lead: DEFAULT_LEAD,
            blocker_length: 0.5,
        }
    }
}

/// Rectangle around one straight link leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockageRegion {
    pub rect: OrientedRect,
    pub start: Point2,
    pub end: Point2,
}

impl BlockageRegion {
    pub fn corners(&self) -> [Point2; 4] {
        self.rect.corners()
    }

    pub fn area(&self) -> f64 {
        4.0 * self.rect.half_length * self.rect.half_width
    }
}

pub fn blockage_region(bs: Point2, user: Point2, width: f64) -> Result<BlockageRegion> {
    let axis = user - bs;
    let len = axis.norm();
    if !(len > 0.0) {
        return Err(Error::Geometry("blockage region endpoints coincide".into()));
    }
    if !(width > 0.0) {
        return Err(Error::Domain(format!("region width must be > 0, got {width}")));
    }
    Ok(BlockageRegion {
        rect: OrientedRect {
            center: bs.lerp(user, 0.5),
            axis: axis * (1.0 / len),
            half_length: len / 2.0,
            half_width: width / 2.0,
        },
        start: bs,
        end: user,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageEvent {
    pub t_predicted: f64,
    pub user_id: usize,
    pub path: PathKind,
    pub t_arrival: f64,
    pub duration: f64,
    pub blocker_id: usize,
}

impl BlockageEvent {
    pub const CSV_HEADER: &'static str = "t_predicted,user_id,path,t_arrival,duration";

    /// Interval during which the path is avoided.
    pub fn window(&self, lead: f64) -> (f64, f64) {
        (self.t_arrival - lead, self.t_arrival + self.duration + lead)
    }

    pub fn active_at(&self, t: f64, lead: f64) -> bool {
        let (a, b) = self.window(lead);
        t >= a && t <= b
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.t_predicted, self.user_id, self.path, self.t_arrival, self.duration)
    }
}

/// Earliest `t ≥ 0` at which the segment `[a, b]` moving with velocity `v`
/// touches the rectangle, if any.
fn first_contact(a: Point2, b: Point2, v: Point2, rect: &OrientedRect) -> Option<f64> {
    if rect.intersects_segment(a, b) {
        return Some(0.0);
    }
    if v.norm() == 0.0 {
        return None;
    }
    let c = rect.corners();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let (q0, q1) = (c[i], c[(i + 1) % 4]);
        // a moving endpoint crossing an edge
        for e in [a, b] {
            if let Some((s, u)) = line_intersection(e, e + v, q0, q1) {
                if s >= 0.0 && (0.0..=1.0).contains(&u) {
                    best = best.min(s);
                }
            }
        }
        // a corner crossing the moving segment, seen in the segment's frame
        if let Some((s, u)) = line_intersection(q0, q0 - v, a, b) {
            if s >= 0.0 && (0.0..=1.0).contains(&u) {
                best = best.min(s);
            }
        }
    }
    best.is_finite().then_some(best)
}

/// Predicts when the tracked blocker enters `region` and how long it blocks
/// the link. The footprint is a segment of length `l_b` along the motion.
pub fn predict_blockage(
    blocker: &Track,
    region: &BlockageRegion,
    l_b: f64,
    now: f64,
    horizon: f64,
    user_id: usize,
    path: PathKind,
) -> Option<BlockageEvent> {
    let p = blocker.position();
    let v = blocker.velocity();
    let speed = v.norm();
    let dir = if speed > 0.0 { v * (1.0 / speed) } else { Point2::new(1.0, 0.0) };
    let (a, b) = (p - dir * (l_b / 2.0), p + dir * (l_b / 2.0));
    let t = first_contact(a, b, v, &region.rect)?;
    if t > horizon {
        return None;
    }
    // time until the trailing end clears the link line, counted from contact
    // or from now if the footprint already straddles it
    let normal = (region.end - region.start).normalized();
    let normal = Point2::new(-normal.y, normal.x);
    let vn = v.dot(normal);
    let duration = if vn.abs() > 1e-9 {
        let (ta, tb) = (-(a - region.start).dot(normal) / vn, -(b - region.start).dot(normal) / vn);
        (ta.max(tb) - ta.min(tb).max(0.0)).max(0.0)
    } else if speed > 0.0 {
        l_b / speed
    } else {
        horizon
    };
    Some(BlockageEvent { t_predicted: now, user_id, path, t_arrival: now + t, duration, blocker_id: blocker.user_id })
}

/// A path the controller could steer to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePath {
    pub kind: PathKind,
    pub angle: f64,
    /// Relative strength used for ranking, linear.
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathChoice {
    pub path: CandidatePath,
    /// True while steering away from the preferred path.
    pub mitigating: bool,
    /// Every candidate is predicted blocked.
    pub outage: bool,
}

/// Picks the strongest path not covered by an active event window; holds
/// the strongest path and flags outage when every path is covered.
pub fn mitigate(events: &[BlockageEvent], available: &[CandidatePath], user_id: usize, now: f64, lead: f64) -> Option<PathChoice> {
    let strongest = available.iter().copied().max_by(|a, b| a.strength.total_cmp(&b.strength))?;
    let blocked = |c: &CandidatePath| events.iter().any(|e| e.user_id == user_id && e.path == c.kind && e.active_at(now, lead));
    if !blocked(&strongest) {
        return Some(PathChoice { path: strongest, mitigating: false, outage: false });
    }
    match available.iter().filter(|c| !blocked(c)).max_by(|a, b| a.strength.total_cmp(&b.strength)) {
        Some(alt) => Some(PathChoice { path: *alt, mitigating: true, outage: false }),
        None => Some(PathChoice { path: strongest, mitigating: false, outage: true }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::segments_intersect;
    use crate::tracking::TrackerConfig;
    use proptest::prelude::*;

    fn blocker(p: Point2, v: Point2) -> Track {
        let mut t = Track::new(9, p, 0.0, &TrackerConfig::default());
        t.kf.x[2] = v.x;
        t.kf.x[3] = v.y;
        t
    }

    #[test]
    fn region_corners() {
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        let mut c: Vec<(i64, i64)> = r.corners().iter().map(|p| ((p.x * 10.0).round() as i64, (p.y * 10.0).round() as i64)).collect();
        c.sort();
        assert_eq!(c, vec![(-2, 0), (-2, 100), (2, 0), (2, 100)]);
        let r = blockage_region(Point2::ORIGIN, Point2::new(10.0, 0.0), 0.4).unwrap();
        let mut c: Vec<(i64, i64)> = r.corners().iter().map(|p| ((p.x * 10.0).round() as i64, (p.y * 10.0).round() as i64)).collect();
        c.sort();
        assert_eq!(c, vec![(0, -2), (0, 2), (100, -2), (100, 2)]);
        assert!((r.area() - 4.0).abs() < 1e-12);
        assert!(blockage_region(Point2::ORIGIN, Point2::ORIGIN, 0.4).is_err());
    }

    #[test]
    fn closed_form_arrival() {
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        let e = predict_blockage(&blocker(Point2::new(2.0, 5.0), Point2::new(-1.0, 0.0)), &r, 0.5, 0.0, 5.0, 1, PathKind::Direct).unwrap();
        assert!((e.t_arrival - 1.55).abs() < 1e-9, "{e:?}");
        assert!((e.duration - 0.5).abs() < 1e-12);
        assert_eq!(e.blocker_id, 9);
    }

    #[test]
    fn straddling_blocker_counts_remaining_time() {
        // center already 0.1 m past the link line, so 0.15 m of footprint left
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        let e = predict_blockage(&blocker(Point2::new(-0.1, 5.0), Point2::new(-1.0, 0.0)), &r, 0.5, 2.0, 5.0, 1, PathKind::Direct).unwrap();
        assert_eq!(e.t_arrival, 2.0);
        assert!((e.duration - 0.15).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn parallel_outside_is_absent() {
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        assert!(predict_blockage(&blocker(Point2::new(2.0, 1.0), Point2::new(0.0, 1.0)), &r, 0.5, 0.0, 5.0, 1, PathKind::Direct).is_none());
    }

    #[test]
    fn stationary_inside_is_persistent() {
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        let e = predict_blockage(&blocker(Point2::new(0.1, 4.0), Point2::ORIGIN), &r, 0.5, 2.0, 5.0, 1, PathKind::Direct).unwrap();
        assert_eq!(e.t_arrival, 2.0);
        assert_eq!(e.duration, 5.0);
        assert!(predict_blockage(&blocker(Point2::new(3.0, 4.0), Point2::ORIGIN), &r, 0.5, 2.0, 5.0, 1, PathKind::Direct).is_none());
    }

    #[test]
    fn beyond_horizon_is_absent() {
        let r = blockage_region(Point2::ORIGIN, Point2::new(0.0, 10.0), 0.4).unwrap();
        assert!(predict_blockage(&blocker(Point2::new(20.0, 5.0), Point2::new(-1.0, 0.0)), &r, 0.5, 0.0, 5.0, 1, PathKind::Direct).is_none());
    }

    fn cands() -> Vec<CandidatePath> {
        vec![
            CandidatePath { kind: PathKind::Direct, angle: 0.0, strength: 1.0 },
            CandidatePath { kind: PathKind::Reflected(0), angle: 30.0, strength: 0.3 },
        ]
    }

    fn event(t_arrival: f64, duration: f64, path: PathKind) -> BlockageEvent {
        BlockageEvent { t_predicted: 0.0, user_id: 1, path, t_arrival, duration, blocker_id: 0 }
    }

    #[test]
    fn switches_for_window_then_reverts() {
        let ev = [event(2.0, 1.0, PathKind::Direct)];
        let pick = |t: f64| mitigate(&ev, &cands(), 1, t, 0.1).unwrap();
        assert_eq!(pick(1.0).path.kind, PathKind::Direct);
        assert_eq!(pick(1.95).path.kind, PathKind::Reflected(0));
        assert!(pick(2.5).mitigating);
        assert_eq!(pick(3.05).path.kind, PathKind::Reflected(0));
        assert_eq!(pick(3.2).path.kind, PathKind::Direct);
    }

    #[test]
    fn no_alternative_holds_with_outage() {
        let ev = [event(0.0, 1.0, PathKind::Direct)];
        let only = &cands()[..1];
        let c = mitigate(&ev, only, 1, 0.5, 0.1).unwrap();
        assert!(c.outage);
        assert_eq!(c.path.kind, PathKind::Direct);
    }

    #[test]
    fn past_event_is_identity() {
        let ev = [event(0.0, 1.0, PathKind::Direct)];
        let c = mitigate(&ev, &cands(), 1, 5.0, 0.1).unwrap();
        assert_eq!(c.path.kind, PathKind::Direct);
        assert!(!c.mitigating && !c.outage);
    }

    /// Steps the footprint in 1 ms increments: arrival against the region,
    /// blocking time against the link segment itself.
    fn brute_force(p: Point2, v: Point2, l_b: f64, r: &BlockageRegion) -> (Option<f64>, f64) {
        let dir = v.normalized();
        let dt = 1e-3;
        let mut arrival = None;
        let mut blocked = 0usize;
        // slowest generated crossing ends near 5.6 s
        for k in 0..=10_000 {
            let c = p + v * (k as f64 * dt);
            let (a, b) = (c - dir * (l_b / 2.0), c + dir * (l_b / 2.0));
            if arrival.is_none() && r.rect.intersects_segment(a, b) {
                arrival = Some(k as f64 * dt);
            }
            if segments_intersect(a, b, r.start, r.end) {
                blocked += 1;
            }
        }
        (arrival, blocked as f64 * dt)
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            ux in -4.0f64..4.0, uy in 4.0f64..9.0,
            frac in 0.3f64..0.7, side in 1.0f64..2.5, heading in 20.0f64..160.0,
            speed in 0.5f64..2.0, l_b in 0.3f64..1.0,
        ) {
            let user = Point2::new(ux, uy);
            let r = blockage_region(Point2::ORIGIN, user, 0.4).unwrap();
            let u = r.rect.axis;
            let n = Point2::new(-u.y, u.x);
            // start on one side of the link mid-section, head across it
            let cross = Point2::from_polar(1.0, heading);
            let cross = if cross.dot(n) > 0.0 { cross } else { -cross };
            let start = Point2::ORIGIN.lerp(user, frac) - cross * side;
            let v = cross * speed;
            let e = predict_blockage(&blocker(start, v), &r, l_b, 0.0, 5.0, 1, PathKind::Direct).unwrap();
            let (arrival, duration) = brute_force(start, v, l_b, &r);
            prop_assert!((e.t_arrival - arrival.unwrap()).abs() <= 0.01, "{} vs {:?}", e.t_arrival, arrival);
            prop_assert!((e.duration - duration).abs() <= 0.01, "{} vs {}", e.duration, duration);
        }

        #[test]
        fn link_inside_region(ux in -8.0f64..8.0, uy in 0.5f64..9.0, w in 0.01f64..2.0, s in 0.0f64..1.0) {
            let user = Point2::new(ux, uy);
            let r = blockage_region(Point2::ORIGIN, user, w).unwrap();
            prop_assert!(r.rect.contains(Point2::ORIGIN.lerp(user, s)));
        }

        #[test]
        fn never_selects_blocked(t in 0.0f64..5.0, ta in 0.0f64..5.0, d in 0.1f64..2.0, which in 0usize..2) {
            let kinds = [PathKind::Direct, PathKind::Reflected(0)];
            let ev = [event(ta, d, kinds[which])];
            let c = mitigate(&ev, &cands(), 1, t, 0.1).unwrap();
            if !c.outage {
                prop_assert!(!(c.path.kind == kinds[which] && ev[0].active_at(t, 0.1)));
            }
        }
    }
}
