//! Scripted and randomly wandering camera and rig motion.

use irtrack_core::interpolation::interpolate_pose;
use irtrack_core::{PoseSource, RigidTransform, TimedPose, UnitQuaternion, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    /// Seconds from the start of the scenario.
    pub t: f64,
    pub pose: RigidTransform,
}

impl Knot {
    pub fn new(t: f64, pose: RigidTransform) -> Self {
        Self { t, pose }
    }
}

/// Piecewise pose path: linear in position, SLERP in orientation, held
/// constant before the first and after the last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PosePath {
    knots: Vec<Knot>,
}

impl PosePath {
    /// Knots are sorted by time; `None` when there are none or a time is not
    /// finite.
    pub fn new(mut knots: Vec<Knot>) -> Option<Self> {
        if knots.is_empty() || knots.iter().any(|k| !k.t.is_finite()) {
            return None;
        }
        knots.sort_by(|a, b| a.t.total_cmp(&b.t));
        Some(Self { knots })
    }

    pub fn fixed(pose: RigidTransform) -> Self {
        Self {
            knots: vec![Knot::new(0.0, pose)],
        }
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// True when every knot holds the same pose.
    pub fn is_static(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].pose == w[1].pose)
    }

    pub fn at(&self, t: f64) -> RigidTransform {
        let k = &self.knots;
        let i = k.partition_point(|knot| knot.t <= t);
        if i == 0 {
            return k[0].pose;
        }
        if i == k.len() {
            return k[i - 1].pose;
        }
        let (a, b) = (&k[i - 1], &k[i]);
        // microsecond clock for the shared interpolation routine
        let us = |s: f64| (s * 1e6).round() as u64;
        let p0 = TimedPose::new(0, a.pose, PoseSource::Measured);
        let p1 = TimedPose::new(us(b.t - a.t), b.pose, PoseSource::Measured);
        interpolate_pose(&p0, &p1, us(t - a.t))
    }
}

/// Random hand-held motion: the camera drifts through a room while the rig
/// is held in front of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WanderParams {
    /// Both stay at their start poses until this time, seconds.
    pub start: f64,
    /// Seconds between random knots.
    pub knot_interval: f64,
    /// Camera positions stay within this distance of the start, per axis.
    pub camera_extent: f64,
    /// Largest camera move between knots, meters.
    pub camera_step: f64,
    /// Largest camera turn away from the start orientation, degrees.
    pub camera_turn_deg: f64,
    /// Rig distance along the optical axis, meters.
    pub rig_depth: (f64, f64),
    /// Largest sideways rig offset from the optical axis, meters.
    pub rig_lateral: f64,
    /// Largest rig tilt away from facing the camera, degrees.
    pub rig_tilt_deg: f64,
}

impl Default for WanderParams {
    fn default() -> Self {
        Self {
            start: 0.0,
            knot_interval: 1.0,
            camera_extent: 0.5,
            camera_step: 0.15,
            camera_turn_deg: 30.0,
            rig_depth: (0.45, 0.75),
            rig_lateral: 0.06,
            rig_tilt_deg: 25.0,
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if (0.1..=1.0).contains(&n) {
            return v * (1.0 / n);
        }
    }
}

/// Rotation by an angle drawn uniformly from `[0, max_rad]` about a random
/// axis.
pub fn random_tilt(rng: &mut ChaCha8Rng, max_rad: f64) -> UnitQuaternion {
    let axis = random_unit(rng);
    UnitQuaternion::from_rotation_vector(axis * rng.random_range(0.0..=max_rad))
}

impl WanderParams {
    /// Camera and rig paths over `[0, duration]` from `seed`, with the
    /// camera starting at `camera_home` and the rig starting `rig_home` in
    /// front of it (camera ← rig).
    pub fn generate(
        &self,
        seed: u64,
        duration: f64,
        camera_home: RigidTransform,
        rig_home: RigidTransform,
    ) -> (PosePath, PosePath) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut camera = vec![Knot::new(0.0, camera_home)];
        let mut rig = vec![Knot::new(0.0, camera_home.compose(&rig_home))];
        let turn = self.camera_turn_deg.to_radians();
        let tilt = self.rig_tilt_deg.to_radians();
        let mut t = self.start.max(0.0);
        let mut offset = Vec3::ZERO;
        if t > 0.0 {
            camera.push(Knot::new(t, camera_home));
            rig.push(Knot::new(t, camera_home.compose(&rig_home)));
        }
        while t < duration {
            t += self.knot_interval;
            let step = random_unit(&mut rng) * rng.random_range(0.0..=self.camera_step);
            let e = self.camera_extent;
            offset += step;
            offset = Vec3::new(
                offset.x.clamp(-e, e),
                offset.y.clamp(-e, e),
                offset.z.clamp(-e, e),
            );
            let cam = RigidTransform::new(
                random_tilt(&mut rng, turn) * camera_home.rotation,
                camera_home.translation + offset,
            );
            let lateral = self.rig_lateral;
            let rel = RigidTransform::new(
                random_tilt(&mut rng, tilt) * rig_home.rotation,
                Vec3::new(
                    rng.random_range(-lateral..=lateral),
                    rng.random_range(-lateral..=lateral),
                    rng.random_range(self.rig_depth.0..=self.rig_depth.1),
                ),
            );
            camera.push(Knot::new(t, cam));
            rig.push(Knot::new(t, cam.compose(&rel)));
        }
        (PosePath { knots: camera }, PosePath { knots: rig })
    }
}
