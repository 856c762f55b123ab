//! RANSAC plane detection and snapping of near-plane points onto the plane.

use irtrack_core::svd::svd3;
use irtrack_core::{Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Plane, PointCloud};

/// Minimum inlier fraction for a plane to count as found.
pub const MIN_INLIER_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("best plane explains only {inliers} of {points} points")]
    NoPlane { inliers: usize, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub dist_threshold: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            dist_threshold: 0.01,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Indices into the input cloud, ascending.
    pub inliers: Vec<usize>,
}

fn inliers_of(cloud: &PointCloud, plane: &Plane, threshold: f64) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&i| plane.signed_distance(cloud.points[i]).abs() <= threshold)
        .collect()
}

/// Least-squares plane through the given points: centroid plus the direction
/// of least variance.
pub fn fit_plane(points: impl Iterator<Item = Vec3> + Clone) -> Option<Plane> {
    let pts: Vec<Vec3> = points.collect();
    let c = Vec3::mean(&pts)?;
    let cov = pts
        .iter()
        .fold(Mat3::ZERO, |acc, p| acc + (*p - c).outer(*p - c));
    let svd = svd3(&cov);
    if pts.len() < 3
        || svd.singular_values[1] <= 1e-12 * svd.singular_values[0].max(f64::MIN_POSITIVE)
    {
        return None;
    }
    Plane::from_point_normal(c, svd.v.column(2))
}

/// Best plane by inlier count over random three-point hypotheses, refined by
/// a least-squares fit to its inliers. Deterministic for a given seed.
pub fn ransac_plane(cloud: &PointCloud, config: &RansacConfig) -> Result<PlaneFit, PlaneError> {
    let n = cloud.len();
    if n < 3 {
        return Err(PlaneError::TooFewPoints(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..config.iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = Plane::through(cloud.points[i], cloud.points[j], cloud.points[k]) else {
            continue;
        };
        let count = cloud
            .points
            .iter()
            .filter(|p| plane.signed_distance(**p).abs() <= config.dist_threshold)
            .count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, plane));
        }
    }
    let Some((count, plane)) = best else {
        return Err(PlaneError::NoPlane {
            inliers: 0,
            points: n,
        });
    };
    if (count as f64) < MIN_INLIER_FRACTION * n as f64 {
        return Err(PlaneError::NoPlane {
            inliers: count,
            points: n,
        });
    }

    let mut fit = PlaneFit {
        inliers: inliers_of(cloud, &plane, config.dist_threshold),
        plane,
    };
    let refined = fit_plane(fit.inliers.iter().map(|&i| cloud.points[i]));
    if let Some(mut plane) = refined {
        // keep the hypothesis orientation so repeated runs agree in sign
        if plane.normal.dot(fit.plane.normal) < 0.0 {
            plane = Plane {
                normal: -plane.normal,
                offset: -plane.offset,
            };
        }
        let inliers = inliers_of(cloud, &plane, config.dist_threshold);
        if inliers.len() >= fit.inliers.len() {
            fit = PlaneFit { plane, inliers };
        }
    }
    Ok(fit)
}

/// Projects the listed points orthogonally onto the plane.
pub fn snap_to_plane(cloud: &PointCloud, plane: &Plane, inliers: &[usize]) -> PointCloud {
    let mut out = cloud.clone();
    for &i in inliers {
        out.points[i] = plane.project(out.points[i]);
    }
    out
}

/// Repeatedly detects a plane among the points not yet explained and snaps
/// its inliers, up to `max_planes` times. Returns the snapped cloud and the
/// planes found.
pub fn snap_planes(
    cloud: &PointCloud,
    config: &RansacConfig,
    max_planes: usize,
) -> (PointCloud, Vec<Plane>) {
    let mut out = cloud.clone();
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut planes = Vec::new();
    for round in 0..max_planes {
        let sub: PointCloud = remaining.iter().map(|&i| out.points[i]).collect();
        let cfg = RansacConfig {
            seed: config.seed.wrapping_add(round as u64),
            ..*config
        };
        let Ok(fit) = ransac_plane(&sub, &cfg) else {
            break;
        };
        for &k in &fit.inliers {
            let i = remaining[k];
            out.points[i] = fit.plane.project(out.points[i]);
        }
        let mut is_inlier = vec![false; sub.len()];
        fit.inliers.iter().for_each(|&k| is_inlier[k] = true);
        remaining = remaining
            .into_iter()
            .zip(is_inlier)
            .filter(|(_, x)| !x)
            .map(|(i, _)| i)
            .collect();
        planes.push(fit.plane);
        if remaining.len() < 3 {
            break;
        }
    }
    (out, planes)
}
