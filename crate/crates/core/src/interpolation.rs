//! Pose prediction between and beyond measured frames: constant-velocity
//! linear interpolation of position and SLERP of orientation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, UnitQuaternion, Vec3};

/// Arc angles below this use normalized linear interpolation.
pub const SLERP_LINEAR_THRESHOLD: f64 = 1e-6;

/// Default extrapolation horizon: about three short-throw frame periods.
pub const DEFAULT_MAX_EXTRAPOLATION_US: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    Measured,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub timestamp_us: u64,
    pub pose: RigidTransform,
    pub source: PoseSource,
}

impl TimedPose {
    pub fn new(timestamp_us: u64, pose: RigidTransform, source: PoseSource) -> Self {
        Self {
            timestamp_us,
            pose,
            source,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredictionError {
    #[error("no measured pose yet")]
    NoHistory,
    #[error("query at {query_us} µs precedes the oldest retained sample at {oldest_us} µs")]
    QueryTooOld { query_us: u64, oldest_us: u64 },
    #[error("last measurement is {age_us} µs old, beyond the extrapolation cap")]
    TrackingStale { age_us: u64 },
}

pub fn lerp_position(p0: Vec3, p1: Vec3, alpha: f64) -> Vec3 {
    p0 + (p1 - p0) * alpha
}

/// Spherical linear interpolation along the shorter arc. `alpha` outside
/// `[0, 1]` extrapolates along the same great circle.
pub fn slerp(q0: UnitQuaternion, q1: UnitQuaternion, alpha: f64) -> UnitQuaternion {
    let a = q0.to_wxyz();
    let mut b = q1.to_wxyz();
    let mut d = q0.dot(q1);
    if d < 0.0 {
        b = b.map(|v| -v);
        d = -d;
    }
    // component of b orthogonal to a; its norm is sin(theta)
    let perp: [f64; 4] = std::array::from_fn(|i| b[i] - d * a[i]);
    let sin_theta = perp.iter().map(|v| v * v).sum::<f64>().sqrt();
    let theta = sin_theta.atan2(d);

    let out: [f64; 4] = if theta < SLERP_LINEAR_THRESHOLD {
        std::array::from_fn(|i| a[i] + alpha * (b[i] - a[i]))
    } else {
        let (s, c) = (alpha * theta).sin_cos();
        std::array::from_fn(|i| a[i] * c + perp[i] / sin_theta * s)
    };
    UnitQuaternion::new_normalize(out[0], out[1], out[2], out[3]).unwrap_or(q0)
}

/// Interpolates (or extrapolates) between two timed poses at `t_us`.
pub fn interpolate_pose(p0: &TimedPose, p1: &TimedPose, t_us: u64) -> RigidTransform {
    let span = p1.timestamp_us as f64 - p0.timestamp_us as f64;
    let alpha = if span == 0.0 {
        1.0
    } else {
        (t_us as f64 - p0.timestamp_us as f64) / span
    };
    RigidTransform::new(
        slerp(p0.pose.rotation, p1.pose.rotation, alpha),
        lerp_position(p0.pose.translation, p1.pose.translation, alpha),
    )
}

/// The two most recent measured poses, owned by the prediction stage.
#[derive(Debug, Clone)]
pub struct PredictionState {
    previous: Option<TimedPose>,
    latest: Option<TimedPose>,
    max_extrapolation_us: u64,
}

impl Default for PredictionState {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_EXTRAPOLATION_US)
    }
}

impl PredictionState {
    pub fn new(max_extrapolation_us: u64) -> Self {
        Self {
            previous: None,
            latest: None,
            max_extrapolation_us,
        }
    }

    pub fn max_extrapolation_us(&self) -> u64 {
        self.max_extrapolation_us
    }

    pub fn latest(&self) -> Option<&TimedPose> {
        self.latest.as_ref()
    }

    /// Records a measurement. Returns `false` (and ignores it) unless its
    /// timestamp is strictly newer than the latest one.
    pub fn push(&mut self, measured: TimedPose) -> bool {
        if let Some(latest) = &self.latest {
            if measured.timestamp_us <= latest.timestamp_us {
                return false;
            }
        }
        self.previous = self.latest.replace(measured);
        true
    }

    /// Drops all history, e.g. after tracking was lost for too long.
    pub fn reset(&mut self) {
        self.previous = None;
        self.latest = None;
    }

    pub fn predict(&self, t_query_us: u64) -> Result<TimedPose, PredictionError> {
        let latest = self.latest.as_ref().ok_or(PredictionError::NoHistory)?;
        if t_query_us == latest.timestamp_us {
            return Ok(TimedPose::new(
                t_query_us,
                latest.pose,
                PoseSource::Predicted,
            ));
        }
        if t_query_us > latest.timestamp_us {
            let age_us = t_query_us - latest.timestamp_us;
            if age_us > self.max_extrapolation_us {
                return Err(PredictionError::TrackingStale { age_us });
            }
        }
        let pose = match &self.previous {
            Some(previous) => {
                if t_query_us <= previous.timestamp_us {
                    return Err(PredictionError::QueryTooOld {
                        query_us: t_query_us,
                        oldest_us: previous.timestamp_us,
                    });
                }
                interpolate_pose(previous, latest, t_query_us)
            }
            None if t_query_us > latest.timestamp_us => latest.pose,
            None => {
                return Err(PredictionError::QueryTooOld {
                    query_us: t_query_us,
                    oldest_us: latest.timestamp_us,
                })
            }
        };
        Ok(TimedPose::new(t_query_us, pose, PoseSource::Predicted))
    }
}
