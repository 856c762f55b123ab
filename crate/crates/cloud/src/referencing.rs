//! The full referencing chain: filter the sensed environment cloud, pose the
//! robot model from its joint state, and register the model into the scene
//! from a user-placed seed.

use irtrack_core::RigidTransform;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{pose_chain, ChainError, KinematicChain};
use crate::cloud::{Plane, PointCloud};
use crate::filters::{
    mls_smooth, radius_outlier_removal, voxel_downsample, DEFAULT_MLS_RADIUS,
    DEFAULT_OUTLIER_MIN_NEIGHBORS, DEFAULT_OUTLIER_RADIUS, DEFAULT_VOXEL_LEAF,
};
use crate::icp::{icp_register, IcpConfig, IcpError, IcpResult};
use crate::plane::{snap_planes, RansacConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub voxel_leaf: f64,
    pub outlier_radius: f64,
    pub outlier_min_neighbors: usize,
    /// `0` disables smoothing.
    pub mls_radius: f64,
    pub ransac: RansacConfig,
    /// Planes to detect and snap; `0` disables snapping.
    pub max_planes: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            voxel_leaf: DEFAULT_VOXEL_LEAF,
            outlier_radius: DEFAULT_OUTLIER_RADIUS,
            outlier_min_neighbors: DEFAULT_OUTLIER_MIN_NEIGHBORS,
            mls_radius: DEFAULT_MLS_RADIUS,
            ransac: RansacConfig::default(),
            max_planes: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferencingConfig {
    pub filters: FilterConfig,
    pub icp: IcpConfig,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferencingError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Icp(#[from] IcpError),
    #[error("scene is empty after filtering")]
    EmptyScene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredScene {
    pub cloud: PointCloud,
    pub planes: Vec<Plane>,
}

/// Voxel grid, radius outlier removal, MLS smoothing, then plane snapping.
pub fn filter_scene(raw: &PointCloud, config: &FilterConfig) -> FilteredScene {
    let mut cloud = voxel_downsample(raw, config.voxel_leaf);
    cloud = radius_outlier_removal(&cloud, config.outlier_radius, config.outlier_min_neighbors);
    if config.mls_radius > 0.0 {
        cloud = mls_smooth(&cloud, config.mls_radius);
    }
    let (cloud, planes) = if config.max_planes > 0 {
        snap_planes(&cloud, &config.ransac, config.max_planes)
    } else {
        (cloud, Vec::new())
    };
    FilteredScene { cloud, planes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencingResult {
    /// Scene ← robot base.
    pub transform: RigidTransform,
    pub icp: IcpResult,
    pub scene_points: usize,
    pub model_points: usize,
}

pub fn reference_robot(
    raw_scene: &PointCloud,
    chain: &KinematicChain,
    joint_state: &[f64],
    seed: &RigidTransform,
    config: &ReferencingConfig,
) -> Result<ReferencingResult, ReferencingError> {
    let model = pose_chain(chain, joint_state)?;
    let scene = filter_scene(raw_scene, &config.filters);
    if scene.cloud.is_empty() {
        return Err(ReferencingError::EmptyScene);
    }
    let icp = icp_register(&model, &scene.cloud, seed, &config.icp)?;
    Ok(ReferencingResult {
        transform: icp.alignment.transform,
        scene_points: scene.cloud.len(),
        model_points: model.len(),
        icp,
    })
}
