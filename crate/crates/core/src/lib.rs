//! Radar-aided millimeter-wave beam management.
//!
//! A simulated base station pairs an FMCW radar with a phased-array radio.
//! Periodic beam scans give the radar its context (user identities and
//! reflecting walls); in between, radar tracks steer the beams, predict
//! reflected paths and switch away from paths a pedestrian is about to block.
//! The guide under `book/` walks through each module.
//!
//! ```
//! use beamsense::harness::{run_scenario, scenarios, ExperimentConfig};
//!
//! let mut scene = scenarios::crossing_2users(0);
//! scene.duration = 1.0;
//! let log = run_scenario(&ExperimentConfig::new(scene)).unwrap();
//! assert_eq!(log.samples_for(beamsense::link::Strategy::Oracle).count(), 200);
//! ```

// NaN must fail validation, so bounds are written as `!(x > 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockage;
pub mod context;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod link;
pub mod radar;
pub mod radio;
pub mod scene;
pub mod tracking;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        };
    }
    chapter!(introduction, "introduction.md");
    chapter!(scene, "scene.md");
    chapter!(radar, "radar.md");
    chapter!(radio, "radio.md");
    chapter!(context, "context.md");
    chapter!(tracking, "tracking.md");
    chapter!(blockage, "blockage.md");
    chapter!(link, "link.md");
    chapter!(harness, "harness.md");
}
