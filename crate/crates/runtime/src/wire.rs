//! Fixed-size binary pose messages.
//!
//! Layout, little-endian throughout:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `IRTK` |
//! | 4 | 1 | version (1) |
//! | 5 | 1 | flags: bit 0 predicted, bit 1 stale |
//! | 6 | 4 | sequence (u32) |
//! | 10 | 8 | timestamp in µs (u64) |
//! | 18 | 24 | position x, y, z (f64, meters) |
//! | 42 | 32 | quaternion w, x, y, z (f64) |
//! | 74 | 4 | reserved, zero |

use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"IRTK";
pub const VERSION: u8 = 1;
pub const MESSAGE_LEN: usize = 78;
pub const FLAG_PREDICTED: u8 = 0b01;
pub const FLAG_STALE: u8 = 0b10;
/// Largest accepted deviation of the decoded quaternion norm from one.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("quaternion norm {0} is not unit")]
    NonUnitQuaternion(f64),
    #[error("message truncated: {0} of {MESSAGE_LEN} bytes")]
    Truncated(usize),
}

/// One pose on the wire. Fields are kept exactly as transmitted so that a
/// decode followed by an encode reproduces the input bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMessage {
    pub flags: u8,
    pub sequence: u32,
    pub timestamp_us: u64,
    pub position: [f64; 3],
    /// `w, x, y, z`.
    pub rotation: [f64; 4],
}

impl PoseMessage {
    pub fn new(sequence: u32, timestamp_us: u64, pose: &RigidTransform, flags: u8) -> Self {
        Self {
            flags,
            sequence,
            timestamp_us,
            position: pose.translation.to_array(),
            rotation: pose.rotation.to_wxyz(),
        }
    }

    pub fn predicted(&self) -> bool {
        self.flags & FLAG_PREDICTED != 0
    }

    pub fn stale(&self) -> bool {
        self.flags & FLAG_STALE != 0
    }

    pub fn pose(&self) -> RigidTransform {
        let [w, x, y, z] = self.rotation;
        let rotation = UnitQuaternion::try_from_wxyz(w, x, y, z, UNIT_TOLERANCE)
            .or_else(|_| UnitQuaternion::new_normalize(w, x, y, z).ok_or(()))
            .unwrap_or_default();
        RigidTransform::new(rotation, Vec3::from(self.position))
    }

    pub fn encode(&self) -> [u8; MESSAGE_LEN] {
        let mut out = [0u8; MESSAGE_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = VERSION;
        out[5] = self.flags;
        out[6..10].copy_from_slice(&self.sequence.to_le_bytes());
        out[10..18].copy_from_slice(&self.timestamp_us.to_le_bytes());
        let doubles = self.position.iter().chain(&self.rotation);
        for (chunk, v) in out[18..74].chunks_exact_mut(8).zip(doubles) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes the first [`MESSAGE_LEN`] bytes; any remainder is ignored, as
    /// are the reserved bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < MESSAGE_LEN {
            return Err(WireError::Truncated(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(WireError::BadVersion(bytes[4]));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let rotation = [f64_at(42), f64_at(50), f64_at(58), f64_at(66)];
        let norm = rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
        // written so that a NaN norm is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let off_unit = !((norm - 1.0).abs() <= UNIT_TOLERANCE);
        if off_unit {
            return Err(WireError::NonUnitQuaternion(norm));
        }
        Ok(Self {
            flags: bytes[5],
            sequence: u32::from_le_bytes(bytes[6..10].try_into().unwrap()),
            timestamp_us: u64::from_le_bytes(bytes[10..18].try_into().unwrap()),
            position: [f64_at(18), f64_at(26), f64_at(34)],
            rotation,
        })
    }
}
