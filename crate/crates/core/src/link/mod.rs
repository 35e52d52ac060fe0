//! Link quality under a beam decision and the per-strategy controllers.

mod controller;
mod snr;

pub use controller::{candidate_paths, controller_step, ControllerConfig, PathUsed, Strategy, ThroughputSample, UserView};
pub use snr::{
    capacity_mbps, optimal_snr, overhead_fraction, received_power, snr, Beam, BeamDecision, BeamMode, ChannelPath,
    ChannelState,
};
