//! Sensor noise and the headset's self-localisation error.
//!
//! The reported camera pose is the true pose with a world-frame error
//! applied about the camera centre: position `p + e_t` and orientation
//! `exp(e_r) · q`. The error is the sum of a constant bias, a linear drift
//! (the slow IMU bias accumulation of a headset at rest), an
//! Ornstein–Uhlenbeck walk (the sum of many small, short-lived localisation
//! errors while moving), and an optional translation bias switched on after
//! calibration.

use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A translation (meters) and a rotation vector (radians), or their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseOffset {
    pub translation: Vec3,
    pub rotation: Vec3,
}

impl PoseOffset {
    pub const ZERO: PoseOffset = PoseOffset {
        translation: Vec3::ZERO,
        rotation: Vec3::ZERO,
    };

    pub fn new(translation: Vec3, rotation: Vec3) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    fn scaled(self, s: f64) -> Self {
        Self::new(self.translation * s, self.rotation * s)
    }

    fn plus(self, o: PoseOffset) -> Self {
        Self::new(self.translation + o.translation, self.rotation + o.rotation)
    }

    /// `pose` with this error applied about its own origin.
    pub fn corrupt(&self, pose: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            UnitQuaternion::from_rotation_vector(self.rotation) * pose.rotation,
            pose.translation + self.translation,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSigma {
    /// meters/√s
    pub translation: f64,
    /// radians/√s
    pub rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Per-pixel Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Gaussian jitter of each drawn marker's centre, pixels per axis.
    pub pixel_jitter_sigma: f64,
    /// Constant localisation error.
    pub camera_bias: PoseOffset,
    /// Localisation error growth per second.
    pub camera_drift: PoseOffset,
    /// Diffusion of the localisation random walk.
    pub camera_walk_sigma: WalkSigma,
    /// Mean-reversion time of the walk, seconds; `0` leaves it unbounded.
    pub walk_tau: f64,
    /// Translation bias added to every frame after calibration, meters.
    pub post_calibration_bias: Vec3,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), String> {
        let scalars = [
            ("depth_sigma", self.depth_sigma),
            ("pixel_jitter_sigma", self.pixel_jitter_sigma),
            (
                "camera_walk_sigma.translation",
                self.camera_walk_sigma.translation,
            ),
            (
                "camera_walk_sigma.rotation",
                self.camera_walk_sigma.rotation,
            ),
            ("walk_tau", self.walk_tau),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        let vectors = [
            self.camera_bias.translation,
            self.camera_bias.rotation,
            self.camera_drift.translation,
            self.camera_drift.rotation,
            self.post_calibration_bias,
        ];
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err("noise vectors must be finite".into());
        }
        Ok(())
    }
}

/// Localisation error of every frame, drawn once up front so that frames
/// can be rendered independently.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraErrorPath {
    errors: Vec<PoseOffset>,
}

impl CameraErrorPath {
    /// Errors for frames `0..frames` at `frame_rate`; the post-calibration
    /// bias applies from frame `calibration_frames` on.
    pub fn new(
        noise: &NoiseParams,
        seed: u64,
        frame_rate: f64,
        frames: usize,
        calibration_frames: usize,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = 1.0 / frame_rate;
        let sigma = noise.camera_walk_sigma;
        let tau = noise.walk_tau;
        // exact discretisation of dx = -x/τ dt + σ dW
        let (decay, spread, initial) = if tau > 0.0 {
            let a = (-dt / tau).exp();
            (a, ((1.0 - a * a) * tau / 2.0).sqrt(), (tau / 2.0).sqrt())
        } else {
            (1.0, dt.sqrt(), 0.0)
        };
        let mut gauss = || -> Vec3 {
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            Vec3::new(draw(), draw(), draw())
        };
        let mut walk = PoseOffset::new(
            gauss() * (sigma.translation * initial),
            gauss() * (sigma.rotation * initial),
        );
        let mut errors = Vec::with_capacity(frames);
        for k in 0..frames {
            if k > 0 {
                walk = walk.scaled(decay).plus(PoseOffset::new(
                    gauss() * (sigma.translation * spread),
                    gauss() * (sigma.rotation * spread),
                ));
            }
            let t = k as f64 * dt;
            let mut e = noise
                .camera_bias
                .plus(noise.camera_drift.scaled(t))
                .plus(walk);
            if k >= calibration_frames {
                e.translation += noise.post_calibration_bias;
            }
            errors.push(e);
        }
        Self { errors }
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// Error of frame `k`; frames past the end reuse the last error.
    pub fn get(&self, k: usize) -> PoseOffset {
        self.errors
            .get(k)
            .or(self.errors.last())
            .copied()
            .unwrap_or(PoseOffset::ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_only_offsets_reported_pose_exactly() {
        let noise = NoiseParams {
            camera_bias: PoseOffset::new(Vec3::new(0.005, 0.0, 0.0), Vec3::ZERO),
            ..Default::default()
        };
        let path = CameraErrorPath::new(&noise, 1, 30.0, 10, 0);
        let truth = RigidTransform::new(
            UnitQuaternion::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7).unwrap(),
            Vec3::new(0.3, -0.2, 1.5),
        );
        for k in 0..10 {
            let reported = path.get(k).corrupt(&truth);
            assert!(
                (reported.translation - truth.translation - Vec3::new(0.005, 0.0, 0.0)).norm()
                    < 1e-15
            );
            assert_eq!(reported.rotation, truth.rotation);
        }
    }

    #[test]
    fn drift_grows_linearly_and_post_bias_switches_on() {
        let noise = NoiseParams {
            camera_drift: PoseOffset::new(Vec3::new(0.0, 3e-3, 0.0), Vec3::ZERO),
            post_calibration_bias: Vec3::new(0.0, 0.0, 0.02),
            ..Default::default()
        };
        let path = CameraErrorPath::new(&noise, 1, 10.0, 30, 20);
        assert!((path.get(10).translation.y - 3e-3).abs() < 1e-15);
        assert_eq!(path.get(19).translation.z, 0.0);
        assert_eq!(path.get(20).translation.z, 0.02);
        assert_eq!(path.get(99), path.get(29));
    }

    #[test]
    fn ou_walk_has_the_stationary_spread() {
        let noise = NoiseParams {
            camera_walk_sigma: WalkSigma {
                translation: 0.04,
                rotation: 0.0,
            },
            walk_tau: 0.5,
            ..Default::default()
        };
        let path = CameraErrorPath::new(&noise, 9, 30.0, 200_000, 0);
        let xs: Vec<f64> = (0..path.len()).map(|k| path.get(k).translation.x).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        let expected = 0.04 * (0.5f64 / 2.0).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.05, "{sd} vs {expected}");
    }

    #[test]
    fn validation_rejects_negative_sigma() {
        let bad = NoiseParams {
            depth_sigma: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(NoiseParams::default().validate().is_ok());
    }
}
