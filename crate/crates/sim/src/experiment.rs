//! The static and dynamic accuracy experiments: render, track, calibrate
//! against ground truth on the first frames, then score the rest.

use irtrack_core::alignment::align_pose_probes;
use irtrack_core::{FrameTracker, RigidTransform, TimedPose, TrackerConfig, Vec3};
use serde::{Deserialize, Serialize};

use crate::scenario::{Motion, ScenarioConfig, Scene, SimError};
use crate::stats::{pose_error, position_normality, ErrorStats, NormalityTest};

pub const STATIC_SAMPLES: usize = 5000;
pub const DYNAMIC_RUNS: usize = 5;
pub const DYNAMIC_SAMPLES_PER_RUN: usize = 2000;
/// Spacing of the samples entering the normality test, seconds.
pub const NORMALITY_SPACING: f64 = 1.0;
pub const NORMALITY_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: usize,
    /// Scored frames rendered, over all runs.
    pub frames: usize,
    /// Scored frames that produced a pose.
    pub tracked: usize,
    pub stats: ErrorStats,
    /// `None` when too few spaced samples vary to run the test.
    pub normality: Option<NormalityTest>,
    /// Estimated → truth correction of the last run.
    pub calibration: RigidTransform,
}

/// Tracked pose and truth of every frame that produced a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedRun {
    pub frames: usize,
    pub samples: Vec<(usize, TimedPose, RigidTransform)>,
}

/// Renders and tracks frames `0..frames` of `scene` in order.
pub fn track_scene(scene: &Scene, tracker_config: TrackerConfig) -> Result<TrackedRun, SimError> {
    let config = scene.config();
    let model = config.marker_model()?;
    let mut tracker = FrameTracker::new(model, config.intrinsics, tracker_config)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut samples = Vec::with_capacity(scene.frames());
    for k in 0..scene.frames() {
        let f = scene.render(k);
        if let Ok(tracked) = tracker.process(&f.reflectivity, &f.depth).result {
            samples.push((k, tracked.pose, f.truth_rig));
        }
    }
    Ok(TrackedRun {
        frames: scene.frames(),
        samples,
    })
}

/// Position and rotation errors of every scored frame, after calibrating
/// on the frames before `calibration_frames`.
fn calibrated_errors(
    run: &TrackedRun,
    calibration_frames: usize,
    probes: &[Vec3],
) -> Result<(RigidTransform, Vec<(Vec3, Vec3)>), SimError> {
    let (cal, scored): (Vec<&(usize, TimedPose, RigidTransform)>, Vec<_>) =
        run.samples.iter().partition(|s| s.0 < calibration_frames);
    let calibration = if calibration_frames == 0 {
        RigidTransform::IDENTITY
    } else {
        let estimated: Vec<TimedPose> = cal.iter().map(|s| s.1).collect();
        let truth: Vec<TimedPose> = cal.iter().map(|s| TimedPose { pose: s.2, ..s.1 }).collect();
        align_pose_probes(&estimated, &truth, probes)
            .map_err(|e| SimError::Calibration(e.to_string()))?
    };
    let errors = scored
        .iter()
        .map(|s| pose_error(&calibration.compose(&s.1.pose), &s.2))
        .collect();
    Ok((calibration, errors))
}

fn normality_stride(config: &ScenarioConfig) -> usize {
    ((NORMALITY_SPACING * config.frame_rate).round() as usize).max(1)
}

fn report(
    config: &ScenarioConfig,
    runs: usize,
    frames: usize,
    errors: &[(Vec3, Vec3)],
    calibration: RigidTransform,
) -> Result<ExperimentReport, SimError> {
    let too_few = |_| SimError::TooFewTracked {
        tracked: errors.len(),
    };
    Ok(ExperimentReport {
        runs,
        frames,
        tracked: errors.len(),
        stats: ErrorStats::from_errors(errors).map_err(too_few)?,
        normality: position_normality(errors, normality_stride(config), NORMALITY_ALPHA).ok(),
        calibration,
    })
}

/// Both camera and rig held still: calibrate on `calibration_frames`
/// frames, then score `n_samples` more.
pub fn run_static_experiment(
    config: &ScenarioConfig,
    n_samples: usize,
) -> Result<ExperimentReport, SimError> {
    if !config.motion.is_static() {
        return Err(SimError::WrongMotion("a static camera and rig"));
    }
    let scene = Scene::new(config, config.calibration_frames + n_samples)?;
    let run = track_scene(&scene, TrackerConfig::default())?;
    let (calibration, errors) =
        calibrated_errors(&run, config.calibration_frames, &config.marker_rig)?;
    report(config, 1, n_samples, &errors, calibration)
}

/// The scenario for run `r` of a dynamic experiment: its own seed, and any
/// wandering starts only after the calibration frames.
pub fn dynamic_run_config(config: &ScenarioConfig, r: usize) -> ScenarioConfig {
    let mut run = config.clone();
    run.seed = config
        .seed
        .wrapping_mul(1_000_003)
        .wrapping_add(r as u64 + 1);
    if let Motion::Wander { params, .. } = &mut run.motion {
        params.start = params
            .start
            .max(config.calibration_frames as f64 / config.frame_rate);
    }
    run
}

/// `n_runs` independent runs, each calibrated on its own static frames and
/// then scored over `samples_per_run` frames of motion; errors are pooled.
pub fn run_dynamic_experiment(
    config: &ScenarioConfig,
    n_runs: usize,
    samples_per_run: usize,
) -> Result<ExperimentReport, SimError> {
    let mut errors = Vec::with_capacity(n_runs * samples_per_run);
    let mut calibration = RigidTransform::IDENTITY;
    for r in 0..n_runs {
        let run_config = dynamic_run_config(config, r);
        let scene = Scene::new(&run_config, run_config.calibration_frames + samples_per_run)?;
        let run = track_scene(&scene, TrackerConfig::default())?;
        let (cal, e) =
            calibrated_errors(&run, run_config.calibration_frames, &run_config.marker_rig)?;
        calibration = cal;
        errors.extend(e);
    }
    report(
        config,
        n_runs,
        n_runs * samples_per_run,
        &errors,
        calibration,
    )
}

/// Uncalibrated tracking accuracy over a whole scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub frames: usize,
    pub tracked: usize,
    /// mm
    pub position_rms: f64,
    /// degrees
    pub angle_rms: f64,
}

pub fn tracking_summary(run: &TrackedRun) -> TrackingSummary {
    let n = run.samples.len().max(1) as f64;
    let (mut p2, mut a2) = (0.0, 0.0);
    for (_, est, truth) in &run.samples {
        let (dp, dr) = pose_error(&est.pose, truth);
        p2 += dp.norm_squared();
        a2 += dr.norm_squared();
    }
    TrackingSummary {
        frames: run.frames,
        tracked: run.samples.len(),
        position_rms: (p2 / n).sqrt() * 1e3,
        angle_rms: (a2 / n).sqrt().to_degrees(),
    }
}
