//! Blob centroids plus depth to camera-frame 3D marker points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Blob, CameraIntrinsics, DepthFrame};
use crate::geometry::Vec3;

/// Valid marker depth range of the short-throw stream, meters.
pub const SHORT_THROW_RANGE: (f64, f64) = (0.2, 1.0);

/// Depth values outside this range (meters) are sensor speckle and count as
/// invalid.
pub const SENSOR_RANGE: (f32, f32) = (0.2, 4.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackprojectionError {
    #[error("no valid depth around pixel ({u:.1}, {v:.1})")]
    NoValidDepth { u: f64, v: f64 },
    #[error("depth {0} must be positive")]
    NonPositiveDepth(f64),
}

/// How the depth of a blob centre is read from the depth frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthLookup {
    /// Median of the valid values in the 3×3 neighbourhood.
    #[default]
    Median3x3,
    /// The single centre pixel.
    CenterPixel,
}

/// Depth at `(u, v)`: the median of valid depths (inside [`SENSOR_RANGE`]) in
/// the 3×3 neighbourhood of the rounded pixel. An even count averages the two
/// middle values.
pub fn depth_lookup(depth: &DepthFrame, u: f64, v: f64) -> Result<f64, BackprojectionError> {
    depth_lookup_with(depth, u, v, DepthLookup::Median3x3)
}

pub fn depth_lookup_with(
    depth: &DepthFrame,
    u: f64,
    v: f64,
    mode: DepthLookup,
) -> Result<f64, BackprojectionError> {
    let err = BackprojectionError::NoValidDepth { u, v };
    let (x, y) = (u.round(), v.round());
    if !(x >= 0.0 && y >= 0.0 && x < depth.width as f64 && y < depth.height as f64) {
        return Err(err);
    }
    let (x, y) = (x as usize, y as usize);
    if mode == DepthLookup::CenterPixel {
        let d = depth.get(x, y);
        return if is_valid(d) { Ok(d as f64) } else { Err(err) };
    }
    let mut values = [0.0f64; 9];
    let mut n = 0;
    for ny in y.saturating_sub(1)..=(y + 1).min(depth.height - 1) {
        for nx in x.saturating_sub(1)..=(x + 1).min(depth.width - 1) {
            let d = depth.get(nx, ny);
            if is_valid(d) {
                values[n] = d as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(err);
    }
    let values = &mut values[..n];
    values.sort_by(f64::total_cmp);
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn is_valid(d: f32) -> bool {
    (SENSOR_RANGE.0..=SENSOR_RANGE.1).contains(&d)
}

/// Pinhole back-projection of a blob centre at planar depth `z`:
/// `(z·x/f, z·y/f, z)` with `(x, y)` measured from the principal point.
pub fn backproject(
    blob: &Blob,
    z: f64,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec3, BackprojectionError> {
    backproject_pixel(blob.centroid_x, blob.centroid_y, z, intrinsics)
}

pub fn backproject_pixel(
    u: f64,
    v: f64,
    z: f64,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec3, BackprojectionError> {
    if !(z > 0.0) {
        return Err(BackprojectionError::NonPositiveDepth(z));
    }
    let x = u - intrinsics.cx;
    let y = v - intrinsics.cy;
    Ok(Vec3::new(z * x / intrinsics.f, z * y / intrinsics.f, z))
}

/// Reconstructed marker points of one frame, in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub points: Vec<Vec3>,
    /// Index of the originating blob for each point.
    pub blob_indices: Vec<usize>,
    pub source_timestamp_us: u64,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-projects every blob that has a valid depth inside the short-throw
/// range; the others are dropped. Blob order is preserved.
///
/// Centroids are in undistorted coordinates while the depth frame is raw, so
/// the lookup happens at the distorted position of each centroid.
pub fn build_detection_set(
    blobs: &[Blob],
    depth: &DepthFrame,
    intrinsics: &CameraIntrinsics,
    mode: DepthLookup,
) -> DetectionSet {
    let mut points = Vec::with_capacity(blobs.len());
    let mut blob_indices = Vec::with_capacity(blobs.len());
    for (i, blob) in blobs.iter().enumerate() {
        let (u, v) = if intrinsics.has_distortion() {
            intrinsics.distort_pixel(blob.centroid_x, blob.centroid_y)
        } else {
            (blob.centroid_x, blob.centroid_y)
        };
        let Ok(z) = depth_lookup_with(depth, u, v, mode) else {
            continue;
        };
        if !(SHORT_THROW_RANGE.0..=SHORT_THROW_RANGE.1).contains(&z) {
            continue;
        }
        if let Ok(p) = backproject(blob, z, intrinsics) {
            points.push(p);
            blob_indices.push(i);
        }
    }
    DetectionSet {
        points,
        blob_indices,
        source_timestamp_us: depth.timestamp_us,
    }
}
