//! Constant-velocity Kalman filter in the plane.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kalman {
    /// `(x, y, vx, vy)`
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

const H: Matrix2x4<f64> = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);

impl Kalman {
    pub fn new(position: Point2, velocity: Point2, pos_var: f64, vel_var: f64) -> Self {
        Kalman {
            x: Vector4::new(position.x, position.y, velocity.x, velocity.y),
            p: Matrix4::from_diagonal(&Vector4::new(pos_var, pos_var, vel_var, vel_var)),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Point2 {
        Point2::new(self.x[2], self.x[3])
    }

    /// Propagates by `dt` with white-acceleration noise of density `sigma_a²`.
    pub fn predict(&mut self, dt: f64, sigma_a: f64) {
        if dt <= 0.0 {
            return;
        }
        let f = Matrix4::new(
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        let q2 = sigma_a * sigma_a;
        let (a, b, c) = (dt.powi(4) / 4.0 * q2, dt.powi(3) / 2.0 * q2, dt * dt * q2);
        let q = Matrix4::new(
            a, 0.0, b, 0.0, //
            0.0, a, 0.0, b, //
            b, 0.0, c, 0.0, //
            0.0, b, 0.0, c,
        );
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + q;
        self.symmetrize();
    }

    /// Position measurement update (Joseph form).
    pub fn update(&mut self, z: Point2, r: Matrix2<f64>) {
        let y = Vector2::new(z.x, z.y) - H * self.x;
        let s = H * self.p * H.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = self.p * H.transpose() * s_inv;
        self.x += k * y;
        let i_kh = Matrix4::identity() - k * H;
        self.p = i_kh * self.p * i_kh.transpose() + k * r * k.transpose();
        self.symmetrize();
    }

    fn symmetrize(&mut self) {
        self.p = (self.p + self.p.transpose()) * 0.5;
    }
}

/// Cartesian covariance of a polar measurement at `range`/`angle_deg`
/// (angle from +y toward +x) with the given range and angle resolutions.
pub fn polar_measurement_cov(range: f64, angle_deg: f64, range_res: f64, angle_res_deg: f64) -> Matrix2<f64> {
    let u = Point2::from_polar(1.0, angle_deg);
    let v = Point2::new(-u.y, u.x);
    let var_r = range_res * range_res;
    let var_t = (range * angle_res_deg.to_radians().sin()).powi(2).max(1e-6);
    let ur = Matrix2::new(u.x * u.x, u.x * u.y, u.x * u.y, u.y * u.y);
    let vt = Matrix2::new(v.x * v.x, v.x * v.y, v.x * v.y, v.y * v.y);
    ur * var_r + vt * var_t
}
