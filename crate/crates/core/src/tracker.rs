//! Per-frame marker tracking: reflectivity and depth frame in, rig pose out.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{self, AlignmentError, ConditionFlag};
use crate::backprojection::{build_detection_set, DepthLookup};
use crate::correspondence::{
    match_points, CorrespondenceError, CorrespondenceSet, MarkerModel, MatchConfig,
};
use crate::frame::{
    detect_blobs_refined, downsample_half, predict_roi, threshold, Blob, CameraIntrinsics,
    DepthFrame, FrameError, ReflectivityFrame, RegionOfInterest, Undistorter,
    DEFAULT_MIN_BLOB_AREA, DEFAULT_THRESHOLD,
};
use crate::geometry::RigidTransform;
use crate::interpolation::{PoseSource, TimedPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub threshold: u8,
    pub min_blob_area: usize,
    pub depth_lookup: DepthLookup,
    #[serde(flatten)]
    pub matching: MatchConfig,
    /// Search only near the markers of the previous frame.
    pub use_roi: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_blob_area: DEFAULT_MIN_BLOB_AREA,
            depth_lookup: DepthLookup::default(),
            matching: MatchConfig::default(),
            use_roi: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("reflectivity and depth frames differ: {0}")]
    MismatchedFrames(&'static str),
    #[error("no markers visible")]
    NoMarkers,
    #[error("only {valid} of {blobs} blobs have a valid depth")]
    NoValidDepth { blobs: usize, valid: usize },
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

/// Processing stages, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Undistort,
    Threshold,
    Downsample,
    Blobs,
    Backproject,
    Match,
    Solve,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Undistort,
        Stage::Threshold,
        Stage::Downsample,
        Stage::Blobs,
        Stage::Backproject,
        Stage::Match,
        Stage::Solve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Undistort => "undistort",
            Stage::Threshold => "threshold",
            Stage::Downsample => "downsample",
            Stage::Blobs => "blobs",
            Stage::Backproject => "backproject",
            Stage::Match => "match",
            Stage::Solve => "solve",
        }
    }
}

/// Wall time spent in each stage for one frame. Stages not reached are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings([Duration; 7]);

impl StageTimings {
    pub fn get(&self, stage: Stage) -> Duration {
        self.0[stage as usize]
    }

    pub fn total(&self) -> Duration {
        self.0.iter().sum()
    }

    fn add(&mut self, stage: Stage, since: Instant) -> Instant {
        let now = Instant::now();
        self.0[stage as usize] += now - since;
        now
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    /// World ← rig, using the camera pose reported with the frame.
    pub pose: TimedPose,
    /// Camera ← rig.
    pub camera_from_rig: RigidTransform,
    pub correspondences: CorrespondenceSet,
    pub rms_error: f64,
    pub condition: ConditionFlag,
    pub blob_count: usize,
    /// The blob behind each matched pair, in pair order.
    pub marker_blobs: Vec<Blob>,
}

#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub timestamp_us: u64,
    pub result: Result<TrackedFrame, TrackError>,
    pub timings: StageTimings,
    /// Whether the full frame had to be searched.
    pub full_frame_search: bool,
}

/// Stateful single-stream tracker. Keeps the matched blobs of the last good
/// frame to restrict the next blob search.
#[derive(Debug, Clone)]
pub struct FrameTracker {
    model: MarkerModel,
    undistorter: Undistorter,
    config: TrackerConfig,
    last_blobs: Option<Vec<Blob>>,
}

impl FrameTracker {
    pub fn new(
        model: MarkerModel,
        intrinsics: CameraIntrinsics,
        config: TrackerConfig,
    ) -> Result<Self, FrameError> {
        intrinsics.validate()?;
        model.check_distinct(config.matching.delta);
        Ok(Self {
            model,
            undistorter: Undistorter::new(&intrinsics),
            config,
            last_blobs: None,
        })
    }

    pub fn model(&self) -> &MarkerModel {
        &self.model
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        self.undistorter.intrinsics()
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Forgets the region of interest; the next frame is searched in full.
    pub fn reset(&mut self) {
        self.last_blobs = None;
    }

    pub fn process(
        &mut self,
        reflectivity: &ReflectivityFrame,
        depth: &DepthFrame,
    ) -> FrameOutcome {
        let mut timings = StageTimings::default();
        let mut full_frame_search = false;
        let result = self.run(reflectivity, depth, &mut timings, &mut full_frame_search);
        self.last_blobs = result
            .as_ref()
            .ok()
            .map(|tracked| tracked.marker_blobs.clone());
        FrameOutcome {
            timestamp_us: reflectivity.timestamp_us,
            result,
            timings,
            full_frame_search,
        }
    }

    fn run(
        &self,
        reflectivity: &ReflectivityFrame,
        depth: &DepthFrame,
        timings: &mut StageTimings,
        full_frame_search: &mut bool,
    ) -> Result<TrackedFrame, TrackError> {
        if reflectivity.width != depth.width || reflectivity.height != depth.height {
            return Err(TrackError::MismatchedFrames("size"));
        }
        if reflectivity.timestamp_us != depth.timestamp_us {
            return Err(TrackError::MismatchedFrames("timestamp"));
        }
        let (w, h) = (reflectivity.width, reflectivity.height);

        let t = Instant::now();
        let undistorted = self.undistorter.apply(reflectivity);
        let t = timings.add(Stage::Undistort, t);
        let full = threshold(&undistorted, self.config.threshold);
        let t = timings.add(Stage::Threshold, t);
        let half = downsample_half(&full);
        let mut t = timings.add(Stage::Downsample, t);

        let roi: Option<RegionOfInterest> = match (&self.last_blobs, self.config.use_roi) {
            (Some(prev), true) => predict_roi(prev, w, h).ok(),
            _ => None,
        };
        let mut blobs = detect_blobs_refined(&full, &half, roi.as_ref(), self.config.min_blob_area);
        if roi.is_none() {
            *full_frame_search = true;
        } else if blobs.len() < self.model.len() {
            // lost-track policy: widen to the whole frame
            *full_frame_search = true;
            blobs = detect_blobs_refined(&full, &half, None, self.config.min_blob_area);
        }
        t = timings.add(Stage::Blobs, t);
        if blobs.is_empty() {
            return Err(TrackError::NoMarkers);
        }

        let detections =
            build_detection_set(&blobs, depth, self.intrinsics(), self.config.depth_lookup);
        let t = timings.add(Stage::Backproject, t);
        if detections.len() < self.config.matching.min_matched {
            return Err(TrackError::NoValidDepth {
                blobs: blobs.len(),
                valid: detections.len(),
            });
        }

        let matched = match_points(&detections.points, &self.model, &self.config.matching);
        let t = timings.add(Stage::Match, t);
        let correspondences = matched?;

        let (source, target) = correspondences.gather(&detections.points, self.model.points());
        let solved = alignment::solve(&source, &target);
        timings.add(Stage::Solve, t);
        let solved = solved?;

        let marker_blobs = correspondences
            .pairs
            .iter()
            .map(|&(d, _)| blobs[detections.blob_indices[d]])
            .collect();
        // solved maps camera-frame detections onto rig-frame model points
        let camera_from_rig = solved.transform.invert();
        let world = reflectivity.camera_pose.compose(&camera_from_rig);
        Ok(TrackedFrame {
            pose: TimedPose::new(reflectivity.timestamp_us, world, PoseSource::Measured),
            camera_from_rig,
            correspondences,
            rms_error: solved.rms_error,
            condition: solved.condition,
            blob_count: blobs.len(),
            marker_blobs,
        })
    }
}
