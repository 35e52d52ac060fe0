//! Reflector localization from a user position and a reflected-path
//! estimate, and aggregation of reflection points into surfaces.

use serde::{Deserialize, Serialize};

use super::{PathEstimate, UserContext};
use crate::error::{Error, Result};
use crate::geometry::{slope_difference_deg, slope_direction, wrap_slope_deg, Point2, C0};

/// A planar reflector recovered from one or more reflection points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectorEstimate {
    pub point: Point2,
    /// Slope angle of the reflector line, degrees from +x, in (-90, 90].
    pub orientation_phi: f64,
    pub endpoints: (Point2, Point2),
    pub n_observations: usize,
}

impl ReflectorEstimate {
    /// Zero extent or a single observation.
    pub fn low_confidence(&self) -> bool {
        self.n_observations < 2 || self.endpoints.0.distance(self.endpoints.1) < 1e-9
    }

    pub fn direction(&self) -> Point2 {
        slope_direction(self.orientation_phi)
    }

    pub fn length(&self) -> f64 {
        self.endpoints.0.distance(self.endpoints.1)
    }

    pub const CSV_HEADER: &'static str = "x1,y1,x2,y2,phi,n_obs";

    pub fn csv_row(&self) -> String {
        let (a, b) = self.endpoints;
        format!("{},{},{},{},{},{}", a.x, a.y, b.x, b.y, self.orientation_phi, self.n_observations)
    }
}

/// Intersects the ray from `bs` along the reflected departure angle with the
/// ellipse whose foci are `bs` and the user and whose focal sum is the
/// reflected path length. Returns the point and the tangent slope there.
pub fn estimate_reflector_point(bs: Point2, user: &UserContext, refl: &PathEstimate) -> Result<(Point2, f64)> {
    if refl.is_direct {
        return Err(Error::Geometry("path estimate is the direct path".into()));
    }
    let user_pos = bs + Point2::from_polar(user.distance, user.angle);
    let length = user.distance + C0 * refl.rel_tof;
    reflection_point_from_length(bs, user_pos, refl.angle, length)
}

/// Same as [`estimate_reflector_point`] with the user position and the
/// reflected path length given directly.
pub fn reflection_point_from_length(bs: Point2, user: Point2, angle_deg: f64, length: f64) -> Result<(Point2, f64)> {
    let d = user - bs;
    let dn = d.norm();
    if !(length > dn + 1e-12) {
        return Err(Error::Geometry(format!(
            "reflected length {length} does not exceed focal distance {dn}"
        )));
    }
    let u = Point2::from_polar(1.0, angle_deg);
    let denom = 2.0 * (length - u.dot(d));
    let t = (length * length - dn * dn) / denom;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Geometry("ray does not meet the ellipse".into()));
    }
    let p = bs + u * t;
    let to_user = user - p;
    // gradient of the focal sum is the sum of unit vectors away from the foci
    let normal = u + if to_user.norm() > 0.0 { -to_user.normalized() } else { Point2::ORIGIN };
    let tangent = Point2::new(-normal.y, normal.x);
    Ok((p, wrap_slope_deg(tangent.y.atan2(tangent.x).to_degrees())))
}

struct Cluster {
    members: Vec<(Point2, f64)>,
    centroid: Point2,
    dir: Point2,
}

impl Cluster {
    fn new(obs: (Point2, f64)) -> Self {
        Cluster { members: vec![obs], centroid: obs.0, dir: slope_direction(obs.1) }
    }

    fn phi(&self) -> f64 {
        wrap_slope_deg(self.dir.y.atan2(self.dir.x).to_degrees())
    }

    fn distance_to_line(&self, p: Point2) -> f64 {
        (p - self.centroid).cross(self.dir).abs()
    }

    /// Total-least-squares refit. Falls back to the mean tangent orientation
    /// while the members do not yet trace out a line: too close together, too
    /// round a cloud, or a fit that disagrees with the tangents themselves.
    fn refit(&mut self, max_angle_deg: f64) {
        let n = self.members.len() as f64;
        let c = self.members.iter().fold(Point2::ORIGIN, |acc, m| acc + m.0) * (1.0 / n);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (p, _) in &self.members {
            let q = *p - c;
            sxx += q.x * q.x;
            sxy += q.x * q.y;
            syy += q.y * q.y;
        }
        self.centroid = c;
        // circular mean on doubled angles
        let (s, co) = self.members.iter().fold((0.0, 0.0), |acc, m| {
            let a = 2.0 * m.1.to_radians();
            (acc.0 + a.sin(), acc.1 + a.cos())
        });
        let mean_phi = (s.atan2(co) / 2.0).to_degrees();
        self.dir = slope_direction(mean_phi);

        let tr = sxx + syy;
        let disc = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
        let (major, minor) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        if major / n < 0.04 || minor > 0.1 * major {
            return;
        }
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let fit = wrap_slope_deg(theta.to_degrees());
        if slope_difference_deg(fit, mean_phi) <= max_angle_deg {
            self.dir = Point2::new(theta.cos(), theta.sin());
        }
    }

    fn estimate(&self) -> ReflectorEstimate {
        let phi = self.phi();
        let dir = slope_direction(phi);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (p, _) in &self.members {
            let s = (*p - self.centroid).dot(dir);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        ReflectorEstimate {
            point: self.centroid,
            orientation_phi: phi,
            endpoints: (self.centroid + dir * lo, self.centroid + dir * hi),
            n_observations: self.members.len(),
        }
    }
}

/// Greedy clustering of (reflection point, orientation) observations into
/// line segments, in observation order.
pub fn accumulate_reflector(history: &[(Point2, f64)], max_angle_deg: f64, max_distance: f64) -> Vec<ReflectorEstimate> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for &obs in history {
        if !obs.0.is_finite() || !obs.1.is_finite() {
            continue;
        }
        let hit = clusters
            .iter_mut()
            .filter(|c| slope_difference_deg(c.phi(), obs.1) <= max_angle_deg && c.distance_to_line(obs.0) <= max_distance)
            .min_by(|a, b| a.distance_to_line(obs.0).total_cmp(&b.distance_to_line(obs.0)));
        match hit {
            Some(c) => {
                c.members.push(obs);
                c.refit(max_angle_deg);
            }
            None => clusters.push(Cluster::new(obs)),
        }
    }
    clusters.iter().map(Cluster::estimate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(p: Point2) -> UserContext {
        UserContext {
            user_id: 1,
            angle: p.angle_from(Point2::ORIGIN),
            distance: p.norm(),
            timestamp: 0.0,
            coarse_distance: p.norm(),
            radar_confirmed: true,
        }
    }

    fn refl(angle: f64, rel_tof: f64) -> PathEstimate {
        PathEstimate { angle, rel_tof, is_direct: false, power: 1.0 }
    }

    #[test]
    fn symmetric_foci() {
        let (p, phi) = reflection_point_from_length(Point2::ORIGIN, Point2::new(2.0, 0.0), 30.0, 4.0).unwrap();
        assert!(p.distance(Point2::new(1.0, 3f64.sqrt())) < 1e-12);
        assert!(phi.abs() < 1e-9);
    }

    #[test]
    fn wall_mirror_oracle() {
        let user = Point2::new(4.0, 2.0);
        let length = 4.0 * 2f64.sqrt();
        let rel = (length - user.norm()) / C0;
        let (p, phi) = estimate_reflector_point(Point2::ORIGIN, &ctx(user), &refl(45.0, rel)).unwrap();
        assert!(p.distance(Point2::new(3.0, 3.0)) < 1e-9, "{p:?}");
        assert!(phi.abs() < 1e-6);
    }

    #[test]
    fn degenerate_length() {
        let user = Point2::new(2.0, 0.0);
        assert!(matches!(
            reflection_point_from_length(Point2::ORIGIN, user, 30.0, 2.0),
            Err(Error::Geometry(_))
        ));
        let direct = PathEstimate { is_direct: true, ..refl(30.0, 1e-9) };
        assert!(estimate_reflector_point(Point2::ORIGIN, &ctx(user), &direct).is_err());
    }

    #[test]
    fn collinear_points() {
        let h: Vec<_> = (0..5).map(|i| (Point2::new(1.0 + 0.75 * i as f64, 3.0), 0.0)).collect();
        let r = accumulate_reflector(&h, 10.0, 0.5);
        assert_eq!(r.len(), 1);
        let e = r[0];
        assert_eq!(e.n_observations, 5);
        assert!(e.orientation_phi.abs() < 1e-9);
        assert!(e.endpoints.0.distance(Point2::new(1.0, 3.0)) < 1e-9);
        assert!(e.endpoints.1.distance(Point2::new(4.0, 3.0)) < 1e-9);
    }

    #[test]
    fn two_walls() {
        let mut h: Vec<_> = (0..4).map(|i| (Point2::new(1.0 + i as f64, 3.0), 0.0)).collect();
        h.extend((0..4).map(|i| (Point2::new(6.0, 1.0 + i as f64), 90.0)));
        h.swap(1, 5);
        let r = accumulate_reflector(&h, 10.0, 0.5);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|e| e.n_observations == 4));
        let vertical = r.iter().find(|e| (e.orientation_phi - 90.0).abs() < 1e-6).unwrap();
        assert!((vertical.point.x - 6.0).abs() < 1e-9);
    }

    #[test]
    fn compact_noisy_cluster_keeps_tangent_orientation() {
        // a short stretch of a vertical wall seen with cross-wall scatter:
        // the point cloud alone suggests a diagonal
        let h = [(3.0, 2.75), (3.06, 2.85), (2.97, 2.8), (3.12, 2.95), (3.03, 3.0), (3.15, 3.15), (3.08, 3.1)];
        let h: Vec<_> = h.iter().map(|&(x, y)| (Point2::new(x, y), 89.5)).collect();
        let r = accumulate_reflector(&h, 10.0, 0.5);
        assert_eq!(r.len(), 1);
        assert!(slope_difference_deg(r[0].orientation_phi, 90.0) < 1.0, "{:?}", r[0]);
    }

    #[test]
    fn singleton_is_low_confidence() {
        let r = accumulate_reflector(&[(Point2::new(2.0, 3.0), 5.0)], 10.0, 0.5);
        assert_eq!(r.len(), 1);
        assert!(r[0].low_confidence());
        assert_eq!(r[0].endpoints.0, r[0].endpoints.1);
        assert!((r[0].orientation_phi - 5.0).abs() < 1e-9);
    }

    #[test]
    fn csv_row_format() {
        let e = ReflectorEstimate {
            point: Point2::new(0.0, 3.0),
            orientation_phi: 0.0,
            endpoints: (Point2::new(-1.0, 3.0), Point2::new(2.5, 3.0)),
            n_observations: 4,
        };
        assert_eq!(e.csv_row(), "-1,3,2.5,3,0,4");
    }

    proptest! {
        #[test]
        fn point_lies_on_ellipse(ux in -5.0f64..5.0, uy in 1.0f64..8.0, angle in -60.0f64..60.0, extra in 0.1f64..6.0) {
            let user = Point2::new(ux, uy);
            let length = user.norm() + extra;
            if let Ok((p, _)) = reflection_point_from_length(Point2::ORIGIN, user, angle, length) {
                prop_assert!((p.norm() + p.distance(user) - length).abs() < 1e-6);
            }
        }

        #[test]
        fn tangent_matches_wall(wall_y in 2.0f64..8.0, ux in -4.0f64..4.0, frac in 0.1f64..0.9) {
            // specular geometry: the ellipse is tangent to the wall at the reflection point
            let user = Point2::new(ux, frac * wall_y);
            let image = Point2::new(0.0, 2.0 * wall_y);
            let s = (wall_y) / (image.y - user.y);
            let sp = Point2::new(image.x + (user.x - image.x) * s, wall_y);
            let length = sp.norm() + sp.distance(user);
            let (p, phi) = reflection_point_from_length(Point2::ORIGIN, user, sp.angle_from(Point2::ORIGIN), length).unwrap();
            prop_assert!(p.distance(sp) < 1e-6);
            prop_assert!(slope_difference_deg(phi, 0.0) < 1e-6);
        }

        #[test]
        fn cluster_points_near_line(n in 2usize..10, y in 1.0f64..5.0) {
            let h: Vec<_> = (0..n).map(|i| (Point2::new(i as f64 * 0.3, y + 0.01 * (i % 2) as f64), 0.0)).collect();
            for e in accumulate_reflector(&h, 10.0, 0.5) {
                let d = (e.point - e.endpoints.0).cross(e.direction()).abs();
                prop_assert!(d <= 0.5);
                let s0 = (e.endpoints.0 - e.point).dot(e.direction());
                let s1 = (e.endpoints.1 - e.point).dot(e.direction());
                prop_assert!(s0 <= s1);
            }
        }
    }
}
