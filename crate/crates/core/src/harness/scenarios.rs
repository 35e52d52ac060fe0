//! Built-in scene generators.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scene::{BlockerSpec, ReflectorSpec, Scene, UserSpec, Waypoint};

pub const BUILTIN: [&str; 5] = ["crossing_2users", "crossing_4users", "reflector_walk", "blocker_crossing", "mixed_suite"];

pub fn builtin(name: &str, seed: u64) -> Result<Scene> {
    match name {
        "crossing_2users" => Ok(crossing_2users(seed)),
        "crossing_4users" => Ok(crossing_4users(seed)),
        "reflector_walk" => Ok(reflector_walk(seed)),
        "blocker_crossing" => Ok(blocker_crossing(seed)),
        "mixed_suite" => Ok(mixed_scene(seed)),
        _ => Err(Error::config("scenario", format!("unknown scenario `{name}`; known: {}", BUILTIN.join(", ")))),
    }
}

fn user(user_id: usize, rcs: f64, wps: &[(f64, f64, f64)]) -> UserSpec {
    UserSpec { user_id, waypoints: wps.iter().map(|&(t, x, y)| Waypoint::new(t, x, y)).collect(), rcs }
}

fn empty(duration: f64, seed: u64) -> Scene {
    Scene {
        users: Vec::new(),
        reflectors: Vec::new(),
        blockers: Vec::new(),
        static_clutter: Vec::new(),
        duration,
        seed,
        max_speed: crate::scene::DEFAULT_MAX_SPEED,
    }
}

/// Two users approach from opposite sides, walk side by side too close for
/// the radar to resolve, then part on each other's side. User 2 is the
/// stronger radar target.
pub fn crossing_2users(seed: u64) -> Scene {
    let mut s = empty(10.0, seed);
    s.users.push(user(1, 1.0, &[(0.0, -3.0, 5.0), (3.0, -0.15, 5.5), (5.0, 0.15, 5.5), (8.0, 3.0, 6.0), (10.0, 3.0, 6.0)]));
    s.users.push(user(2, 2.0, &[(0.0, 3.0, 5.0), (3.0, 0.15, 5.5), (5.0, -0.15, 5.5), (8.0, -3.0, 6.0), (10.0, -3.0, 6.0)]));
    s
}

/// Four users start at the corners of a square and walk the diagonals
/// through a common center.
pub fn crossing_4users(seed: u64) -> Scene {
    let mut s = empty(10.0, seed);
    let corners = [(-3.0, 3.0), (3.0, 3.0), (3.0, 9.0), (-3.0, 9.0)];
    for (i, &(x, y)) in corners.iter().enumerate() {
        s.users.push(user(i + 1, 1.0 + 0.25 * i as f64, &[(0.0, x, y), (10.0, -x, 12.0 - y)]));
    }
    s
}

/// A user walks parallel to a short wall; the reflected path exists only
/// while the specular point stays on the wall.
pub fn reflector_walk(seed: u64) -> Scene {
    let mut s = empty(10.0, seed);
    s.users.push(user(1, 1.0, &[(0.0, -4.0, 3.0), (10.0, 4.0, 3.0)]));
    s.reflectors.push(ReflectorSpec { p1: Point2::new(-1.5, 8.0), p2: Point2::new(1.0, 8.0), reflection_coeff: 0.7 });
    s
}

/// One user near the boresight beside a strongly reflecting wall; a
/// pedestrian crosses the direct path and then stops clear of both paths.
pub fn blocker_crossing(seed: u64) -> Scene {
    let mut s = empty(10.0, seed);
    s.users.push(user(1, 1.0, &[(0.0, -0.5, 6.0), (10.0, 0.5, 6.0)]));
    s.reflectors.push(ReflectorSpec { p1: Point2::new(3.0, 1.0), p2: Point2::new(3.0, 10.0), reflection_coeff: 0.9 });
    s.blockers.push(BlockerSpec {
        waypoints: vec![Waypoint::new(0.0, -4.0, 2.5), Waypoint::new(5.5, 1.5, 2.5), Waypoint::new(10.0, 1.5, 2.5)],
        length_lb: 0.5,
        attenuation_db: 30.0,
        rcs: 2.0,
    });
    s
}

/// Pulls a point back inside ±50° and 2.5–10 m of the base station.
fn in_view(p: Point2) -> Point2 {
    let r = p.norm().clamp(2.5, 10.0);
    let a = p.angle_from(Point2::ORIGIN).clamp(-50.0, 50.0);
    Point2::from_polar(r, a)
}

/// Randomized composite: 3–5 users converge on a shared spot, linger there
/// closer than the radar can resolve, then leave in spread-out directions
/// assigned at random, so paths cross. Walls and pedestrians are added.
pub fn mixed_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_7865_6421);
    let mut s = empty(15.0, seed);
    let hub = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(5.0..7.0));
    let n_users = rng.random_range(3..=5);
    let t_meet = rng.random_range(2.0..3.0);
    let t_leave = t_meet + rng.random_range(1.0..1.5);
    let theta0 = rng.random_range(0.0..TAU);
    let mut exits: Vec<usize> = (0..n_users).collect();
    exits.shuffle(&mut rng);
    for (i, &exit) in exits.iter().enumerate() {
        let a = TAU * (i as f64 + rng.random_range(-0.2..0.2)) / n_users as f64;
        let start = in_view(hub + Point2::new(a.cos(), a.sin()) * rng.random_range(2.0..3.0));
        let meet = hub + Point2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
        let b = theta0 + TAU * (exit as f64 + rng.random_range(-0.15..0.15)) / n_users as f64;
        let speed = rng.random_range(0.6..1.0);
        let end = in_view(meet + Point2::new(b.cos(), b.sin()) * (speed * (s.duration - t_leave)));
        let rcs = rng.random_range(0.7..2.0);
        s.users.push(user(
            i + 1,
            rcs,
            &[(0.0, start.x, start.y), (t_meet, meet.x, meet.y), (t_leave, meet.x, meet.y), (s.duration, end.x, end.y)],
        ));
    }
    for side in [-1.0, 1.0] {
        if rng.random_bool(0.6) {
            let x = side * rng.random_range(4.5..6.0);
            s.reflectors.push(ReflectorSpec {
                p1: Point2::new(x, 1.0),
                p2: Point2::new(x, 11.0),
                reflection_coeff: rng.random_range(0.5..0.8),
            });
        }
    }
    let n_blockers = rng.random_range(1..=2);
    for _ in 0..n_blockers {
        let y = rng.random_range(2.0..4.0);
        let t0 = rng.random_range(3.0..9.0);
        let speed = rng.random_range(0.8..1.4);
        let (x0, x1): (f64, f64) = if rng.random_bool(0.5) { (-5.0, 5.0) } else { (5.0, -5.0) };
        let t1 = t0 + (x1 - x0).abs() / speed;
        let mut wps = vec![Waypoint::new(0.0, x0, y), Waypoint::new(t0, x0, y), Waypoint::new(t1, x1, y)];
        if t1 < s.duration {
            wps.push(Waypoint::new(s.duration, x1, y));
        }
        s.blockers.push(BlockerSpec { waypoints: wps, length_lb: 0.5, attenuation_db: 30.0, rcs: 2.0 });
    }
    s
}

/// `n` mixed scenes with consecutive seeds.
pub fn mixed_suite(n: usize, base_seed: u64) -> Vec<Scene> {
    (0..n as u64).map(|i| mixed_scene(base_seed + i)).collect()
}
