//! Reflected-path geometry from a reflector estimate: the mirrored base
//! station and the departure angle toward a tracked user.

use super::Track;
use crate::context::ReflectorEstimate;
use crate::geometry::{line_intersection, Point2};

/// Margin beyond the estimated endpoints within which a specular point is
/// still accepted, m.
pub const ENDPOINT_MARGIN: f64 = 0.1;

/// Mirror image of the base station (origin) across the reflector line.
pub fn virtual_bs(reflector: &ReflectorEstimate) -> Point2 {
    let phi = reflector.orientation_phi.to_radians();
    let (xr, yr) = (reflector.point.x, reflector.point.y);
    if phi.cos().abs() < 1e-12 {
        return Point2::new(2.0 * xr, 0.0);
    }
    let m = phi.tan();
    let k = 2.0 * (yr - m * xr) / (1.0 + m * m);
    Point2::new(-m * k, k)
}

/// Specular point on the reflector for a user at `user`, if it lies within
/// the reflector's endpoints.
pub fn specular_point_on(user: Point2, reflector: &ReflectorEstimate) -> Option<Point2> {
    let vbs = virtual_bs(reflector);
    let dir = reflector.direction();
    let (s, _) = line_intersection(vbs, user, reflector.point, reflector.point + dir)?;
    if !(s > 0.0 && s < 1.0) {
        return None;
    }
    let sp = vbs + (user - vbs) * s;
    let proj = |p: Point2| (p - reflector.point).dot(dir);
    let (a, b) = (proj(reflector.endpoints.0), proj(reflector.endpoints.1));
    let x = proj(sp);
    (x >= a.min(b) - ENDPOINT_MARGIN && x <= a.max(b) + ENDPOINT_MARGIN).then_some(sp)
}

/// Departure angle of the reflected path toward `user`, degrees.
pub fn reflected_angle_at(user: Point2, reflector: &ReflectorEstimate) -> Option<f64> {
    specular_point_on(user, reflector).map(|sp| sp.angle_from(Point2::ORIGIN))
}

pub fn reflected_path_angle(track: &Track, reflector: &ReflectorEstimate) -> Option<f64> {
    reflected_angle_at(track.position(), reflector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::slope_direction;
    use proptest::prelude::*;

    fn wall(point: Point2, phi: f64, half: f64) -> ReflectorEstimate {
        let d = slope_direction(phi);
        ReflectorEstimate { point, orientation_phi: phi, endpoints: (point - d * half, point + d * half), n_observations: 5 }
    }

    #[test]
    fn horizontal_and_vertical_walls() {
        assert!(virtual_bs(&wall(Point2::new(0.0, 3.0), 0.0, 5.0)).distance(Point2::new(0.0, 6.0)) < 1e-12);
        assert!(virtual_bs(&wall(Point2::new(4.0, 1.0), 90.0, 5.0)).distance(Point2::new(8.0, 0.0)) < 1e-12);
        assert!(virtual_bs(&wall(Point2::new(1.0, 1.0), 45.0, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn wall_angles() {
        let w = wall(Point2::new(0.0, 3.0), 0.0, 5.0);
        let a = reflected_angle_at(Point2::new(1.0, 1.0), &w).unwrap();
        let b = reflected_angle_at(Point2::new(-1.0, 1.0), &w).unwrap();
        let expected = 0.6f64.atan2(3.0).to_degrees();
        assert!((a - expected).abs() < 1e-9);
        assert!((expected - 11.31).abs() < 0.005);
        assert!((b + expected).abs() < 1e-9);
        assert!((a - b - 22.62).abs() < 0.01);
    }

    #[test]
    fn walk_off_end_of_reflector() {
        let w = ReflectorEstimate {
            point: Point2::new(1.0, 3.0),
            orientation_phi: 0.0,
            endpoints: (Point2::new(0.0, 3.0), Point2::new(2.0, 3.0)),
            n_observations: 4,
        };
        let mut seen = Vec::new();
        for i in 0..40 {
            let user = Point2::new(-2.0 + 0.2 * i as f64, 1.5);
            seen.push(reflected_angle_at(user, &w).is_some());
        }
        let first = seen.iter().position(|&x| x).unwrap();
        let last = seen.iter().rposition(|&x| x).unwrap();
        assert!(first > 0 && last < seen.len() - 1);
        assert!(seen[first..=last].iter().all(|&x| x));
    }

    #[test]
    fn symmetric_user_on_vertical_wall_axis() {
        // user on the same horizontal as the BS: the specular point is midway
        let w = wall(Point2::new(3.0, 0.0), 90.0, 5.0);
        let user = Point2::new(0.0, 2.0);
        let a = reflected_angle_at(user, &w).unwrap();
        let sp = Point2::new(3.0, 1.0);
        assert!((a - sp.angle_from(Point2::ORIGIN)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn mirror_involution(px in -5.0f64..5.0, py in 1.0f64..8.0, phi in -89.0f64..90.0) {
            let w = wall(Point2::new(px, py), phi, 3.0);
            let v = virtual_bs(&w);
            let oracle = Point2::ORIGIN.mirror_across(w.point, w.direction());
            prop_assert!(v.distance(oracle) < 1e-9 * (1.0 + v.norm()));
            // mirroring the mirrored base station returns the origin
            prop_assert!(v.mirror_across(w.point, w.direction()).norm() < 1e-9 * (1.0 + v.norm()));
        }

        #[test]
        fn image_source_length(ux in -4.0f64..4.0, uy in 0.5f64..2.5) {
            let w = wall(Point2::new(0.0, 3.0), 0.0, 50.0);
            let user = Point2::new(ux, uy);
            let sp = specular_point_on(user, &w).unwrap();
            let direct = sp.norm() + sp.distance(user);
            prop_assert!((virtual_bs(&w).distance(user) - direct).abs() < 1e-9);
        }

        #[test]
        fn angle_continuous_in_interior(ux in -2.0f64..2.0, uy in 0.5f64..2.5) {
            let w = wall(Point2::new(0.0, 3.0), 0.0, 50.0);
            let a = reflected_angle_at(Point2::new(ux, uy), &w).unwrap();
            let b = reflected_angle_at(Point2::new(ux + 1e-6, uy), &w).unwrap();
            prop_assert!((a - b).abs() < 1e-3);
        }
    }
}
