//! Static clutter cancellation on the complex range-angle field.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::radar::{to_db, RangeAngleMap};

/// Exponentially averaged complex field of past frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterProfile {
    pub avg_map: Vec<Complex64>,
    pub dims: (usize, usize),
    pub n_frames_averaged: usize,
    /// EMA factor once the running mean has seen `1/alpha` frames.
    pub alpha: f64,
    /// Noise variance of `avg_map` relative to one frame's noise.
    noise_factor: f64,
}

impl ClutterProfile {
    pub fn new(dims: (usize, usize), alpha: f64) -> Self {
        ClutterProfile {
            avg_map: vec![Complex64::new(0.0, 0.0); dims.0 * dims.1],
            dims,
            n_frames_averaged: 0,
            alpha,
            noise_factor: 0.0,
        }
    }

    fn update(&mut self, field: &[Complex64]) {
        self.n_frames_averaged += 1;
        let a = (1.0 / self.n_frames_averaged as f64).max(self.alpha);
        for (avg, z) in self.avg_map.iter_mut().zip(field) {
            *avg = *avg * (1.0 - a) + z * a;
        }
        self.noise_factor = (1.0 - a).powi(2) * self.noise_factor + a * a;
    }
}

/// Subtracts the clutter profile from `map` and then folds `map` into the
/// profile. Cells whose power fell below the profile are floored. An empty
/// profile passes the map through unchanged.
pub fn remove_clutter(map: &RangeAngleMap, profile: &mut ClutterProfile) -> Result<RangeAngleMap> {
    if map.dims() != profile.dims {
        return Err(Error::DimensionMismatch { expected: profile.dims, got: map.dims() });
    }
    let mut out = map.clone();
    if profile.n_frames_averaged > 0 {
        for (o, a) in out.field.iter_mut().zip(&profile.avg_map) {
            // energy that left a cell is a departed object, not a new one
            if o.norm_sqr() < a.norm_sqr() {
                *o = Complex64::new(0.0, 0.0);
            } else {
                *o -= a;
            }
        }
        out.power_db = out.field.iter().map(|z| to_db(z.norm_sqr())).collect();
        out.noise_floor_db = map.noise_floor_db + 10.0 * (1.0 + profile.noise_factor).log10();
    }
    profile.update(&map.field);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::radar::{range_angle_map, synthesize_scatterers, RadarConfig, Scatterer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frames(targets: impl Fn(usize) -> Vec<Scatterer>, n: usize) -> Vec<RangeAngleMap> {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        (0..n)
            .map(|k| range_angle_map(&synthesize_scatterers(&targets(k), k as f64 * 0.2, &cfg, &mut rng), &cfg).unwrap())
            .collect()
    }

    fn wall() -> Vec<Scatterer> {
        (0..8).map(|i| Scatterer { position: Point2::new(-2.0 + 0.5 * i as f64, 8.0), rcs: 5.0 }).collect()
    }

    #[test]
    fn static_scene_suppressed_to_noise() {
        let maps = frames(|_| wall(), 14);
        let noise_only = frames(|_| vec![], 14);
        let mut p = ClutterProfile::new(maps[0].dims(), 0.05);
        let mut q = ClutterProfile::new(maps[0].dims(), 0.05);
        let mut last = None;
        let mut last_noise = None;
        for (m, n) in maps.iter().zip(&noise_only) {
            last = Some(remove_clutter(m, &mut p).unwrap());
            last_noise = Some(remove_clutter(n, &mut q).unwrap());
        }
        assert!(maps[0].max_db() - maps[0].noise_floor_db > 25.0);
        let residual = last.unwrap().max_db();
        let reference = last_noise.unwrap().max_db();
        assert!(residual <= reference + 3.0, "{residual} vs {reference}");
    }

    #[test]
    fn moving_user_kept_wall_suppressed() {
        let user = |k: usize| Scatterer { position: Point2::new(-3.0 + 0.2 * k as f64, 4.0), rcs: 1.0 };
        let maps = frames(|k| {
            let mut t = wall();
            t.push(user(k));
            t
        }, 15);
        let plain = frames(|k| vec![user(k)], 15);
        let mut p = ClutterProfile::new(maps[0].dims(), 0.05);
        let mut out = None;
        for m in &maps {
            out = Some(remove_clutter(m, &mut p).unwrap());
        }
        let out = out.unwrap();
        let last = maps.last().unwrap();
        let (ui, uj) = plain.last().unwrap().argmax();
        assert!((out.power(ui, uj) - plain.last().unwrap().power(ui, uj)).abs() <= 1.0);
        let (wi, wj) = frames(|_| wall(), 1)[0].argmax();
        assert!(last.power(wi, wj) - out.power(wi, wj) >= 15.0);
    }

    #[test]
    fn empty_profile_is_identity() {
        let maps = frames(|_| wall(), 1);
        let mut p = ClutterProfile::new(maps[0].dims(), 0.05);
        assert_eq!(remove_clutter(&maps[0], &mut p).unwrap(), maps[0]);
        assert_eq!(p.n_frames_averaged, 1);
    }

    #[test]
    fn dims_checked() {
        let maps = frames(|_| vec![], 1);
        let mut p = ClutterProfile::new((3, 3), 0.05);
        assert!(remove_clutter(&maps[0], &mut p).is_err());
    }
}
