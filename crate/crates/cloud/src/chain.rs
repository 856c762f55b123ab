//! Serial revolute chains and their posed model clouds.
//!
//! Every coordinate, sample points and joint axes alike, is given in the base
//! frame with the robot at its home pose (all joints zero). Forward kinematics
//! is then a product of rotations about the home-pose axes.

use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain has {joints} joints but {given} joint values were given")]
    JointCountMismatch { joints: usize, given: usize },
    #[error("link {0}: joint axis must be non-zero")]
    ZeroAxis(usize),
    #[error("link 0 is the base and cannot carry a joint; link {0} is missing one")]
    BadJointLayout(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    #[default]
    Revolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub axis: Vec3,
    /// A point on the axis.
    pub origin: Vec3,
    #[serde(rename = "type", default)]
    pub kind: JointType,
}

impl Joint {
    /// Rotation by `angle` about this joint's axis line.
    pub fn transform(&self, angle: f64) -> RigidTransform {
        let q = UnitQuaternion::from_axis_angle(self.axis, angle).unwrap_or_default();
        RigidTransform::new(q, self.origin - q.rotate(self.origin))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub points: PointCloud,
    /// The joint connecting this link to the previous one; `None` for the base.
    #[serde(default)]
    pub joint: Option<Joint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub links: Vec<Link>,
}

impl KinematicChain {
    pub fn joint_count(&self) -> usize {
        self.links.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        for (i, link) in self.links.iter().enumerate() {
            match (&link.joint, i) {
                (Some(_), 0) => return Err(ChainError::BadJointLayout(0)),
                (None, i) if i > 0 => return Err(ChainError::BadJointLayout(i)),
                (Some(j), i) if j.axis.normalized().is_none() => {
                    return Err(ChainError::ZeroAxis(i))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Base ← link transform of every link for the given joint angles.
    pub fn link_transforms(&self, joint_state: &[f64]) -> Result<Vec<RigidTransform>, ChainError> {
        self.validate()?;
        if joint_state.len() != self.joint_count() {
            return Err(ChainError::JointCountMismatch {
                joints: self.joint_count(),
                given: joint_state.len(),
            });
        }
        let mut acc = RigidTransform::IDENTITY;
        let mut out = Vec::with_capacity(self.links.len());
        for (i, link) in self.links.iter().enumerate() {
            if let Some(joint) = &link.joint {
                acc = acc.compose(&joint.transform(joint_state[i - 1]));
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Model cloud of the chain at `joint_state`, in the base frame.
pub fn pose_chain(chain: &KinematicChain, joint_state: &[f64]) -> Result<PointCloud, ChainError> {
    let transforms = chain.link_transforms(joint_state)?;
    let mut cloud = PointCloud::default();
    for (link, t) in chain.links.iter().zip(&transforms) {
        cloud
            .points
            .extend(link.points.points.iter().map(|&p| t.apply(p)));
    }
    Ok(cloud)
}
