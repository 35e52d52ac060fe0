//! Planar geometry shared by every module.
//!
//! Angles follow a single convention across the crate: degrees measured from
//! boresight (the +y axis), positive toward +x (clockwise when viewed with +y
//! up). A point at range `r` and angle `θ` from the origin sits at
//! `(r·sin θ, r·cos θ)`.
//!
//! Reflector orientation is the exception: it is a line *slope* angle measured
//! from the +x axis, so that `tan φ` is the slope of the line.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Point at `range` meters and `angle_deg` from boresight, relative to `self`.
    pub fn from_polar(range: f64, angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        Point2::new(range * a.sin(), range * a.cos())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    /// Angle of `self` seen from `origin`, degrees from boresight.
    pub fn angle_from(self, origin: Point2) -> f64 {
        let d = self - origin;
        d.x.atan2(d.y).to_degrees()
    }

    /// Mirror image of `self` across the infinite line through `a` with direction `dir`.
    pub fn mirror_across(self, a: Point2, dir: Point2) -> Point2 {
        let u = dir.normalized();
        let foot = a + u * (self - a).dot(u);
        foot * 2.0 - self
    }

    pub fn lerp(self, o: Point2, s: f64) -> Point2 {
        self + (o - self) * s
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Unit direction of a line with slope angle `phi_deg` (from +x).
pub fn slope_direction(phi_deg: f64) -> Point2 {
    let p = phi_deg.to_radians();
    Point2::new(p.cos(), p.sin())
}

/// Wraps a slope angle into (-90, 90].
pub fn wrap_slope_deg(phi: f64) -> f64 {
    let mut p = phi % 180.0;
    if p <= -90.0 {
        p += 180.0;
    } else if p > 90.0 {
        p -= 180.0;
    }
    p
}

/// Smallest difference between two line orientations, in [0, 90].
pub fn slope_difference_deg(a: f64, b: f64) -> f64 {
    wrap_slope_deg(a - b).abs()
}

/// Intersection parameters `(s, u)` of segment `p0 + s·(p1-p0)` with the line
/// `q0 + u·(q1-q0)`. Returns `None` for parallel lines.
pub fn line_intersection(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let d = q1 - q0;
    let denom = r.cross(d);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = q0 - p0;
    Some((w.cross(d) / denom, w.cross(r) / denom))
}

/// True when the closed segments `a0-a1` and `b0-b1` share a point.
pub fn segments_intersect(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> bool {
    match line_intersection(a0, a1, b0, b1) {
        Some((s, u)) => (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u),
        None => false,
    }
}

/// Oriented rectangle given by its center, unit axis, half length along the
/// axis and half width across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub axis: Point2,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [Point2; 4] {
        let u = self.axis.normalized();
        let n = Point2::new(-u.y, u.x);
        let a = u * self.half_length;
        let b = n * self.half_width;
        [
            self.center - a - b,
            self.center + a - b,
            self.center + a + b,
            self.center - a + b,
        ]
    }

    pub fn contains(&self, p: Point2) -> bool {
        let u = self.axis.normalized();
        let n = Point2::new(-u.y, u.x);
        let d = p - self.center;
        d.dot(u).abs() <= self.half_length + 1e-12 && d.dot(n).abs() <= self.half_width + 1e-12
    }

    pub fn intersects_segment(&self, a: Point2, b: Point2) -> bool {
        if self.contains(a) || self.contains(b) {
            return true;
        }
        let c = self.corners();
        (0..4).any(|i| segments_intersect(a, b, c[i], c[(i + 1) % 4]))
    }
}
