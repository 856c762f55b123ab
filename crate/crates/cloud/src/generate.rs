use irtrack_core::backprojection::{backproject_pixel, SENSOR_RANGE};
use irtrack_core::{CameraIntrinsics, DepthFrame};

use crate::cloud::PointCloud;

/// World-frame cloud from depth frames: every valid pixel is back-projected
/// and moved by its frame's camera pose. Frames are not registered to each
/// other.
pub fn generate_cloud(frames: &[DepthFrame], intrinsics: &CameraIntrinsics) -> PointCloud {
    let mut cloud = PointCloud::default();
    for frame in frames {
        for v in 0..frame.height {
            for u in 0..frame.width {
                let d = frame.get(u, v);
                if !(SENSOR_RANGE.0..=SENSOR_RANGE.1).contains(&d) {
                    continue;
                }
                let (x, y) = if intrinsics.has_distortion() {
                    intrinsics.undistort_pixel(u as f64, v as f64)
                } else {
                    (u as f64, v as f64)
                };
                if let Ok(p) = backproject_pixel(x, y, d as f64, intrinsics) {
                    cloud.points.push(frame.camera_pose.apply(p));
                }
            }
        }
    }
    cloud
}
