//! Synthetic sensor frames and ground truth for the marker tracker.
//!
//! A scenario moves a marker rig in front of a head-mounted camera and
//! renders matching reflectivity and depth frames. The camera pose attached
//! to each frame carries a modelled self-localisation error, and the true
//! rig pose is logged alongside. On top of the renderer sit the accuracy
//! experiments (static and moving headset) and a robot work cell for the
//! point-cloud referencing chain.

pub mod cell;
pub mod experiment;
pub mod noise;
pub mod output;
pub mod scenario;
pub mod stats;
pub mod trajectory;

pub use experiment::{
    run_dynamic_experiment, run_static_experiment, ExperimentReport, TrackingSummary,
};
pub use noise::{NoiseParams, PoseOffset, WalkSigma};
pub use scenario::{Motion, RenderedFrame, ScenarioConfig, Scene, SimError};
pub use stats::{gaussian_fit, ErrorStats, GaussianFit, NormalityTest, StatsError};
pub use trajectory::{Knot, PosePath, WanderParams};
