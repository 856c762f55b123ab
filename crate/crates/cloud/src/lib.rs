//! Environment point clouds and robot referencing.
//!
//! Depth frames taken along the headset trajectory are merged into one world
//! cloud, thinned on a voxel grid, cleaned of sparse outliers, smoothed by
//! moving least squares and snapped onto dominant planes. A model cloud of the
//! robot, posed from its joint state, is then registered into that scene by
//! seeded ICP.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cloud;
pub mod filters;
pub mod generate;
pub mod grid;
pub mod icp;
pub mod plane;
pub mod ply;
pub mod referencing;

pub use chain::{pose_chain, ChainError, Joint, JointType, KinematicChain, Link};
pub use cloud::{Plane, PointCloud};
pub use filters::{mls_smooth, radius_outlier_removal, voxel_downsample};
pub use generate::generate_cloud;
pub use icp::{icp_register, IcpConfig, IcpError, IcpResult};
pub use plane::{ransac_plane, snap_planes, snap_to_plane, PlaneError, PlaneFit, RansacConfig};
pub use referencing::{
    filter_scene, reference_robot, FilterConfig, ReferencingConfig, ReferencingError,
    ReferencingResult,
};
