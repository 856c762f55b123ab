//! Inside-out tracking of rigid infra-red marker rigs from a headset depth
//! sensor's reflectivity and depth streams.
//!
//! A frame pair is undistorted, thresholded and halved; bright blobs are
//! back-projected with their depth into camera-frame points; the points are
//! identified against a known marker layout by pairwise distances; and the
//! rig pose follows from a closed-form least-squares rigid alignment.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod backprojection;
pub mod correspondence;
pub mod frame;
pub mod geometry;
pub mod interpolation;
pub mod io;
pub mod svd;
pub mod tracker;

pub use alignment::{AlignmentError, AlignmentProblem, AlignmentResult, ConditionFlag};
pub use backprojection::{DepthLookup, DetectionSet};
pub use correspondence::{CorrespondenceError, CorrespondenceSet, MarkerModel, MatchConfig};
pub use frame::{Blob, CameraIntrinsics, DepthFrame, ReflectivityFrame, RegionOfInterest};
pub use geometry::{angular_distance, Mat3, RigidTransform, UnitQuaternion, Vec3};
pub use interpolation::{PoseSource, PredictionError, PredictionState, TimedPose};
pub use tracker::{
    FrameOutcome, FrameTracker, Stage, StageTimings, TrackError, TrackedFrame, TrackerConfig,
};
