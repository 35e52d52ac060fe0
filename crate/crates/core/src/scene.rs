//! Ground-truth world model: mobile users and blockers on piecewise-linear
//! trajectories, static specular reflectors and clutter, and the geometric
//! propagation paths between the base station (at the origin) and each user.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{line_intersection, OrientedRect, Point2, C0};

/// Depth of a blocker's occupancy footprint across its direction of motion.
pub const BLOCKER_DEPTH: f64 = 0.3;

/// Default pedestrian speed bound used by scene validation.
pub const DEFAULT_MAX_SPEED: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub position: Point2,
}

impl Waypoint {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Waypoint {
            t,
            position: Point2::new(x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub user_id: usize,
    pub waypoints: Vec<Waypoint>,
    /// Radar cross-section, m².
    pub rcs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectorSpec {
    pub p1: Point2,
    pub p2: Point2,
    /// Linear amplitude factor applied to the reflected path, in (0, 1].
    pub reflection_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockerSpec {
    pub waypoints: Vec<Waypoint>,
    /// Extent of the blocker along its direction of motion, m.
    pub length_lb: f64,
    /// Loss applied to every path crossing the blocker, dB.
    pub attenuation_db: f64,
    pub rcs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterPoint {
    pub position: Point2,
    pub rcs: f64,
}

fn default_max_speed() -> f64 {
    DEFAULT_MAX_SPEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub reflectors: Vec<ReflectorSpec>,
    #[serde(default)]
    pub blockers: Vec<BlockerSpec>,
    #[serde(default)]
    pub static_clutter: Vec<ClutterPoint>,
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
}

fn validate_waypoints(path: &str, wps: &[Waypoint], max_speed: Option<f64>) -> Result<()> {
    if wps.is_empty() {
        return Err(Error::config(path, "at least one waypoint required"));
    }
    for (i, w) in wps.iter().enumerate() {
        if !w.t.is_finite() || !w.position.is_finite() {
            return Err(Error::config(format!("{path}[{i}]"), "non-finite waypoint"));
        }
    }
    for (i, pair) in wps.windows(2).enumerate() {
        let dt = pair[1].t - pair[0].t;
        if dt <= 0.0 {
            return Err(Error::config(
                format!("{path}[{}].t", i + 1),
                "waypoint times must be strictly increasing",
            ));
        }
        if let Some(vmax) = max_speed {
            let v = pair[0].position.distance(pair[1].position) / dt;
            if v > vmax + 1e-9 {
                return Err(Error::config(
                    format!("{path}[{}]", i + 1),
                    format!("implied speed {v:.3} m/s exceeds max_speed {vmax} m/s"),
                ));
            }
        }
    }
    Ok(())
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::config("scene.duration", "must be > 0"));
        }
        if self.users.is_empty() {
            return Err(Error::config("scene.users", "at least one user required"));
        }
        for (i, u) in self.users.iter().enumerate() {
            validate_waypoints(
                &format!("scene.users[{i}].waypoints"),
                &u.waypoints,
                Some(self.max_speed),
            )?;
            if !(u.rcs > 0.0) {
                return Err(Error::config(format!("scene.users[{i}].rcs"), "must be > 0"));
            }
            if self.users[..i].iter().any(|o| o.user_id == u.user_id) {
                return Err(Error::config(
                    format!("scene.users[{i}].user_id"),
                    "duplicate user_id",
                ));
            }
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if r.p1 == r.p2 {
                return Err(Error::config(
                    format!("scene.reflectors[{i}]"),
                    "endpoints must differ",
                ));
            }
            if !(r.reflection_coeff > 0.0 && r.reflection_coeff <= 1.0) {
                return Err(Error::config(
                    format!("scene.reflectors[{i}].reflection_coeff"),
                    "must lie in (0, 1]",
                ));
            }
        }
        for (i, b) in self.blockers.iter().enumerate() {
            validate_waypoints(&format!("scene.blockers[{i}].waypoints"), &b.waypoints, None)?;
            if !(b.length_lb > 0.0) {
                return Err(Error::config(
                    format!("scene.blockers[{i}].length_lb"),
                    "must be > 0",
                ));
            }
            if !(b.attenuation_db >= 0.0) {
                return Err(Error::config(
                    format!("scene.blockers[{i}].attenuation_db"),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }

    pub fn user(&self, user_id: usize) -> Option<&UserSpec> {
        self.users.iter().find(|u| u.user_id == user_id)
    }
}

/// Kinematic state of a waypoint trajectory at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Point2,
    pub velocity: Point2,
    /// Direction of the most recent moving segment (or +x if never moving).
    pub heading: Point2,
}

/// Piecewise-linear interpolation of a trajectory. Times outside the waypoint
/// span clamp to the first/last waypoint with zero velocity.
pub fn interpolate(wps: &[Waypoint], t: f64) -> Kinematics {
    let mut heading = Point2::new(1.0, 0.0);
    let first = wps[0];
    if wps.len() == 1 || t <= first.t {
        if let Some(h) = wps.windows(2).map(|w| w[1].position - w[0].position).find(|d| d.norm() > 0.0) {
            heading = h.normalized();
        }
        let velocity = if wps.len() > 1 && t == first.t {
            (wps[1].position - first.position) * (1.0 / (wps[1].t - first.t))
        } else {
            Point2::ORIGIN
        };
        return Kinematics {
            position: first.position,
            velocity,
            heading,
        };
    }
    for w in wps.windows(2) {
        let d = w[1].position - w[0].position;
        if d.norm() > 0.0 {
            heading = d.normalized();
        }
        if t >= w[0].t && t < w[1].t {
            let s = (t - w[0].t) / (w[1].t - w[0].t);
            return Kinematics {
                position: w[0].position.lerp(w[1].position, s),
                velocity: d * (1.0 / (w[1].t - w[0].t)),
                heading,
            };
        }
    }
    Kinematics {
        position: wps[wps.len() - 1].position,
        velocity: Point2::ORIGIN,
        heading,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub user_id: usize,
    pub position: Point2,
    pub velocity: Point2,
    pub rcs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockerState {
    pub blocker_id: usize,
    pub position: Point2,
    pub velocity: Point2,
    pub heading: Point2,
    pub length_lb: f64,
    pub attenuation_db: f64,
    pub rcs: f64,
}

impl BlockerState {
    /// Occupancy rectangle: `length_lb` along the heading, [`BLOCKER_DEPTH`] across.
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect {
            center: self.position,
            axis: self.heading,
            half_length: self.length_lb / 2.0,
            half_width: BLOCKER_DEPTH / 2.0,
        }
    }
}

/// The world at a single instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSnapshot {
    pub t: f64,
    pub base_station: Point2,
    pub users: Vec<UserState>,
    pub blockers: Vec<BlockerState>,
    pub reflectors: Vec<ReflectorSpec>,
    pub static_clutter: Vec<ClutterPoint>,
}

impl SceneSnapshot {
    pub fn user(&self, user_id: usize) -> Result<&UserState> {
        self.users
            .iter()
            .find(|u| u.user_id == user_id)
            .ok_or(Error::NotFound { what: "user", id: user_id })
    }
}

pub fn sample_scene(scene: &Scene, t: f64) -> Result<SceneSnapshot> {
    if !(0.0..=scene.duration).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            duration: scene.duration,
        });
    }
    let users = scene
        .users
        .iter()
        .map(|u| {
            let k = interpolate(&u.waypoints, t);
            UserState {
                user_id: u.user_id,
                position: k.position,
                velocity: k.velocity,
                rcs: u.rcs,
            }
        })
        .collect();
    let blockers = scene
        .blockers
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let k = interpolate(&b.waypoints, t);
            BlockerState {
                blocker_id: i,
                position: k.position,
                velocity: k.velocity,
                heading: k.heading,
                length_lb: b.length_lb,
                attenuation_db: b.attenuation_db,
                rcs: b.rcs,
            }
        })
        .collect();
    Ok(SceneSnapshot {
        t,
        base_station: Point2::ORIGIN,
        users,
        blockers,
        reflectors: scene.reflectors.clone(),
        static_clutter: scene.static_clutter.clone(),
    })
}

/// Friis received power in dBm.
pub fn friis_rss(distance: f64, wavelength: f64, tx_power_dbm: f64, tx_gain_dbi: f64, rx_gain_dbi: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be > 0, got {wavelength}")));
    }
    Ok(tx_power_dbm + tx_gain_dbi + rx_gain_dbi - 20.0 * (4.0 * PI * distance / wavelength).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    Reflected(usize),
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathKind::Direct => write!(f, "direct"),
            PathKind::Reflected(i) => write!(f, "reflected({i})"),
        }
    }
}

/// One propagation path from the base station to a user.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    /// Departure angle at the base station, degrees from boresight.
    pub departure_angle: f64,
    pub length: f64,
    /// Complex amplitude for a 0 dBm isotropic transmitter, before blockage.
    pub gain: Complex64,
    pub tof: f64,
    pub blocked: bool,
    /// Total blocker loss on this path, dB (0 when unblocked).
    pub attenuation_db: f64,
    /// Polyline vertices from base station to user.
    pub vertices: Vec<Point2>,
}

impl Path {
    /// Gain including blockage loss.
    pub fn effective_gain(&self) -> Complex64 {
        self.gain * 10f64.powf(-self.attenuation_db / 20.0)
    }
}

/// Specular point on the reflector segment for a source and receiver on the
/// same side of it, if the image-source ray hits the segment interior.
pub fn specular_point(bs: Point2, user: Point2, refl: &ReflectorSpec) -> Option<Point2> {
    let dir = refl.p2 - refl.p1;
    let image = bs.mirror_across(refl.p1, dir);
    let (s, u) = line_intersection(image, user, refl.p1, refl.p2)?;
    if s > 0.0 && s < 1.0 && u > 0.0 && u < 1.0 {
        Some(refl.p1 + dir * u)
    } else {
        None
    }
}

fn path_gain(length: f64, wavelength: f64, scale: f64) -> Complex64 {
    // friis_rss cannot fail here: length and wavelength are positive
    let rss = friis_rss(length, wavelength, 0.0, 0.0, 0.0).expect("positive length");
    let amp = 10f64.powf(rss / 20.0) * scale;
    Complex64::from_polar(amp, -2.0 * PI * length / wavelength)
}

fn blockage_loss(snapshot: &SceneSnapshot, vertices: &[Point2]) -> f64 {
    snapshot
        .blockers
        .iter()
        .filter(|b| {
            let fp = b.footprint();
            vertices.windows(2).any(|seg| fp.intersects_segment(seg[0], seg[1]))
        })
        .map(|b| b.attenuation_db)
        .sum()
}

/// All propagation paths to `user_id`: the direct path first, then one per
/// reflector with a valid specular point, in reflector order.
pub fn compute_paths(snapshot: &SceneSnapshot, user_id: usize, wavelength: f64) -> Result<Vec<Path>> {
    let bs = snapshot.base_station;
    let user = snapshot.user(user_id)?.position;
    let mut paths = Vec::with_capacity(1 + snapshot.reflectors.len());

    let length = bs.distance(user);
    if !(length > 0.0) {
        return Err(Error::Geometry("user coincides with base station".into()));
    }
    let vertices = vec![bs, user];
    let att = blockage_loss(snapshot, &vertices);
    paths.push(Path {
        kind: PathKind::Direct,
        departure_angle: user.angle_from(bs),
        length,
        gain: path_gain(length, wavelength, 1.0),
        tof: length / C0,
        blocked: att > 0.0,
        attenuation_db: att,
        vertices,
    });

    for (i, refl) in snapshot.reflectors.iter().enumerate() {
        let Some(sp) = specular_point(bs, user, refl) else {
            continue;
        };
        let length = bs.distance(sp) + sp.distance(user);
        let vertices = vec![bs, sp, user];
        let att = blockage_loss(snapshot, &vertices);
        paths.push(Path {
            kind: PathKind::Reflected(i),
            departure_angle: sp.angle_from(bs),
            length,
            gain: path_gain(length, wavelength, refl.reflection_coeff),
            tof: length / C0,
            blocked: att > 0.0,
            attenuation_db: att,
            vertices,
        });
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDA_28G: f64 = C0 / 28e9;

    fn walk_scene() -> Scene {
        Scene {
            users: vec![UserSpec {
                user_id: 1,
                waypoints: vec![Waypoint::new(0.0, 0.0, 5.0), Waypoint::new(10.0, 10.0, 5.0)],
                rcs: 1.0,
            }],
            reflectors: vec![],
            blockers: vec![],
            static_clutter: vec![],
            duration: 10.0,
            seed: 7,
            max_speed: DEFAULT_MAX_SPEED,
        }
    }

    fn one_user(p: Point2, reflectors: Vec<ReflectorSpec>) -> SceneSnapshot {
        SceneSnapshot {
            t: 0.0,
            base_station: Point2::ORIGIN,
            users: vec![UserState {
                user_id: 1,
                position: p,
                velocity: Point2::ORIGIN,
                rcs: 1.0,
            }],
            blockers: vec![],
            reflectors,
            static_clutter: vec![],
        }
    }

    fn wall(x0: f64, x1: f64, y: f64) -> ReflectorSpec {
        ReflectorSpec {
            p1: Point2::new(x0, y),
            p2: Point2::new(x1, y),
            reflection_coeff: 0.7,
        }
    }

    #[test]
    fn interpolation_examples() {
        let s = walk_scene();
        assert_eq!(sample_scene(&s, 0.0).unwrap().users[0].position, Point2::new(0.0, 5.0));
        assert_eq!(sample_scene(&s, 5.0).unwrap().users[0].position, Point2::new(5.0, 5.0));
        // oracle: x(t) = x0 + (x1 - x0) * t / T
        let oracle = 0.0 + (10.0 - 0.0) * 2.5 / 10.0;
        assert_eq!(sample_scene(&s, 2.5).unwrap().users[0].position, Point2::new(oracle, 5.0));
        assert_eq!(sample_scene(&s, 10.0).unwrap().users[0].position, Point2::new(10.0, 5.0));
    }

    #[test]
    fn sample_out_of_range() {
        let s = walk_scene();
        assert!(matches!(sample_scene(&s, -0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(sample_scene(&s, 10.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn validation_rejects_fast_users() {
        let mut s = walk_scene();
        s.users[0].waypoints[1].t = 2.0; // 5 m/s
        match s.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scene.users[0].waypoints[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boresight_direct_path() {
        let snap = one_user(Point2::new(0.0, 5.0), vec![]);
        let paths = compute_paths(&snap, 1, LAMBDA_28G).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].kind, PathKind::Direct);
        assert!(paths[0].departure_angle.abs() < 1e-12);
        assert!((paths[0].length - 5.0).abs() < 1e-12);
        assert!((paths[0].tof - 5.0 / C0).abs() < 1e-20);
    }

    #[test]
    fn wall_reflection_mirror_oracle() {
        let snap = one_user(Point2::new(4.0, 2.0), vec![wall(-5.0, 5.0, 3.0)]);
        let paths = compute_paths(&snap, 1, LAMBDA_28G).unwrap();
        assert_eq!(paths.len(), 2);
        let r = &paths[1];
        assert_eq!(r.kind, PathKind::Reflected(0));
        assert!((r.departure_angle - 45.0).abs() < 1e-9);
        assert!((r.length - 4.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!(r.length >= paths[0].length);

        let short = one_user(Point2::new(4.0, 2.0), vec![wall(-5.0, 2.0, 3.0)]);
        assert_eq!(compute_paths(&short, 1, LAMBDA_28G).unwrap().len(), 1);
    }

    #[test]
    fn unknown_user() {
        let snap = one_user(Point2::new(0.0, 5.0), vec![]);
        assert!(matches!(compute_paths(&snap, 9, LAMBDA_28G), Err(Error::NotFound { .. })));
    }

    #[test]
    fn friis_examples() {
        let a = friis_rss(10.0, LAMBDA_28G, 0.0, 0.0, 0.0).unwrap();
        let b = friis_rss(20.0, LAMBDA_28G, 0.0, 0.0, 0.0).unwrap();
        assert!((a - b - 20.0 * 2f64.log10()).abs() < 1e-12);
        let id = friis_rss(LAMBDA_28G / (4.0 * PI), LAMBDA_28G, 3.0, 0.0, 0.0).unwrap();
        assert!((id - 3.0).abs() < 1e-12);
        // -20 log10(4π·10/λ) with λ = c0/28e9
        assert!((a - (-81.3909)).abs() < 1e-3, "{a}");
        assert!(friis_rss(0.0, LAMBDA_28G, 0.0, 0.0, 0.0).is_err());
        assert!(friis_rss(1.0, -1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn blocked_direct_path() {
        let mut snap = one_user(Point2::new(0.0, 6.0), vec![]);
        snap.blockers.push(BlockerState {
            blocker_id: 0,
            position: Point2::new(0.1, 3.0),
            velocity: Point2::new(-1.0, 0.0),
            heading: Point2::new(-1.0, 0.0),
            length_lb: 0.5,
            attenuation_db: 30.0,
            rcs: 1.0,
        });
        let p = &compute_paths(&snap, 1, LAMBDA_28G).unwrap()[0];
        assert!(p.blocked);
        let ratio = p.effective_gain().norm() / p.gain.norm();
        assert!((20.0 * ratio.log10() + 30.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn image_source_identity(ux in -8.0..8.0f64, uy in 0.5..8.0f64, wy in 9.0..15.0f64, slope in -20.0..20.0f64) {
            let dir = crate::geometry::slope_direction(slope);
            let c = Point2::new(0.0, wy);
            let refl = ReflectorSpec { p1: c - dir * 50.0, p2: c + dir * 50.0, reflection_coeff: 1.0 };
            let user = Point2::new(ux, uy);
            let img = Point2::ORIGIN.mirror_across(refl.p1, refl.p2 - refl.p1);
            let back = img.mirror_across(refl.p1, refl.p2 - refl.p1);
            prop_assert!(back.distance(Point2::ORIGIN) < 1e-9);
            let snap = one_user(user, vec![refl]);
            let paths = compute_paths(&snap, 1, LAMBDA_28G).unwrap();
            prop_assume!(paths.len() == 2);
            prop_assert!((paths[1].length - img.distance(user)).abs() < 1e-9);
            prop_assert!(paths[1].length >= paths[0].length);
        }

        #[test]
        fn friis_slope(d in 0.1..1000.0f64) {
            let a = friis_rss(d, LAMBDA_28G, 0.0, 0.0, 0.0).unwrap();
            let b = friis_rss(d * 10.0, LAMBDA_28G, 0.0, 0.0, 0.0).unwrap();
            prop_assert!((a - b - 20.0).abs() < 1e-9);
        }

        #[test]
        fn interpolation_hits_waypoints(t1 in 0.5..5.0f64, x in -3.0..3.0f64) {
            let wps = vec![Waypoint::new(0.0, 0.0, 4.0), Waypoint::new(t1, x, 4.0 + 0.1 * t1), Waypoint::new(t1 + 2.0, x, 6.0)];
            prop_assert_eq!(interpolate(&wps, t1).position, wps[1].position);
            prop_assert_eq!(interpolate(&wps, t1 + 2.0).position, wps[2].position);
            let a = interpolate(&wps, t1 - 1e-9).position;
            prop_assert!(a.distance(wps[1].position) < 1e-6);
        }
    }
}
