//! Radar tracking between beam scans, anchored by radio context.

mod assignment;
mod blockers;
mod clutter;
mod kalman;
mod reflected;
mod tracker;

pub use assignment::hungarian;
pub use blockers::{BlockerTrack, BlockerTracker};
pub use clutter::{remove_clutter, ClutterProfile};
pub use kalman::{polar_measurement_cov, Kalman};
pub use reflected::{reflected_angle_at, reflected_path_angle, specular_point_on, virtual_bs, ENDPOINT_MARGIN};
pub use tracker::{detections, recalibrate, track_step, Track, TrackerConfig};
