//! Scenario description and frame rendering.

use irtrack_core::backprojection::SHORT_THROW_RANGE;
use irtrack_core::{
    CameraIntrinsics, DepthFrame, MarkerModel, ReflectivityFrame, RigidTransform, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{CameraErrorPath, NoiseParams, PoseOffset, WalkSigma};
use crate::trajectory::{PosePath, WanderParams};

/// Pen-like five-marker layout, about 12 cm long, with all pairwise
/// distances at least 12 mm apart.
pub const DEFAULT_RIG: [[f64; 3]; 5] = [
    [-0.0768, -0.0237, -0.0061],
    [0.029, 0.0078, 0.0073],
    [-0.0413, -0.0399, 0.0184],
    [0.0454, -0.008, -0.0145],
    [0.0438, 0.0638, -0.0051],
];
pub const DEFAULT_MARKER_RADIUS: f64 = 0.006;
/// Rig distance for the static experiment, "one arm-length away".
pub const STATIC_DISTANCE: f64 = 0.6;
pub const DEFAULT_FRAME_RATE: f64 = 30.0;
pub const DEFAULT_CALIBRATION_FRAMES: usize = 1000;

const BACKGROUND: (u8, u8) = (10, 60);
const DISTRACTOR: (u8, u8) = (240, 250);
const MARKER_INTENSITY: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("frame {frame}: marker {marker} leaves the short-throw range or the image")]
    OutOfRange { frame: usize, marker: usize },
    #[error("the experiment needs {0}")]
    WrongMotion(&'static str),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("only {tracked} frames were tracked")]
    TooFewTracked { tracked: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// World ← camera and world ← rig paths.
    Scripted { camera: PosePath, rig: PosePath },
    /// Random motion generated from the scenario seed. `rig_home` is
    /// camera ← rig.
    Wander {
        camera_home: RigidTransform,
        rig_home: RigidTransform,
        params: WanderParams,
    },
}

impl Motion {
    /// Camera and rig held still, the rig `distance` straight ahead.
    pub fn fixed(distance: f64) -> Self {
        Motion::Scripted {
            camera: PosePath::fixed(RigidTransform::IDENTITY),
            rig: PosePath::fixed(RigidTransform::from_translation(Vec3::new(
                0.0, 0.0, distance,
            ))),
        }
    }

    pub fn wander(params: WanderParams) -> Self {
        Motion::Wander {
            camera_home: RigidTransform::IDENTITY,
            rig_home: RigidTransform::from_translation(Vec3::new(0.0, 0.0, STATIC_DISTANCE)),
            params,
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            Motion::Scripted { camera, rig } => camera.is_static() && rig.is_static(),
            Motion::Wander { .. } => false,
        }
    }

    fn resolve(&self, seed: u64, duration: f64) -> (PosePath, PosePath) {
        match self {
            Motion::Scripted { camera, rig } => (camera.clone(), rig.clone()),
            Motion::Wander {
                camera_home,
                rig_home,
                params,
            } => params.generate(seed, duration, *camera_home, *rig_home),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Marker centres in the rig frame, meters.
    pub marker_rig: Vec<Vec3>,
    pub marker_radius: f64,
    pub motion: Motion,
    /// Hz
    pub frame_rate: f64,
    pub intrinsics: CameraIntrinsics,
    pub noise: NoiseParams,
    /// Seconds rendered by `simulate`.
    pub duration: f64,
    pub seed: u64,
    /// Frames used by the experiments to calibrate tracked poses against
    /// ground truth; the post-calibration bias starts after them.
    pub calibration_frames: usize,
    /// Bright but sub-threshold patches in the background.
    pub distractors: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            marker_rig: DEFAULT_RIG
                .iter()
                .map(|&[x, y, z]| Vec3::new(x, y, z))
                .collect(),
            marker_radius: DEFAULT_MARKER_RADIUS,
            motion: Motion::fixed(STATIC_DISTANCE),
            frame_rate: DEFAULT_FRAME_RATE,
            intrinsics: CameraIntrinsics::short_throw(),
            noise: NoiseParams::default(),
            duration: 10.0,
            seed: 0,
            calibration_frames: DEFAULT_CALIBRATION_FRAMES,
            distractors: 4,
        }
    }
}

/// Static-case noise: a constant bias that calibration removes, a slow
/// position drift, and mild depth and centroid noise.
pub fn static_noise() -> NoiseParams {
    NoiseParams {
        depth_sigma: 0.001,
        pixel_jitter_sigma: 0.1,
        camera_bias: PoseOffset::new(
            Vec3::new(0.004, -0.002, 0.003),
            Vec3::new(0.002, 0.0, -0.001),
        ),
        camera_drift: PoseOffset::new(Vec3::new(1.6e-5, -1.0e-5, 0.6e-5), Vec3::ZERO),
        ..Default::default()
    }
}

/// Dynamic-case noise: the static sources plus a mean-reverting
/// localisation walk that dominates.
pub fn dynamic_noise() -> NoiseParams {
    NoiseParams {
        camera_walk_sigma: WalkSigma {
            translation: 0.036,
            rotation: 0.01,
        },
        walk_tau: 0.3,
        ..static_noise()
    }
}

impl ScenarioConfig {
    pub fn static_preset(seed: u64) -> Self {
        Self {
            noise: static_noise(),
            seed,
            ..Default::default()
        }
    }

    pub fn dynamic_preset(seed: u64) -> Self {
        Self {
            noise: dynamic_noise(),
            motion: Motion::wander(WanderParams::default()),
            seed,
            ..Default::default()
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn marker_model(&self) -> Result<MarkerModel, SimError> {
        MarkerModel::new(self.marker_rig.clone())
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.marker_rig.len() < 3 {
            return bad("the rig needs at least 3 markers".into());
        }
        if !(self.marker_radius > 0.0 && self.marker_radius.is_finite()) {
            return bad("marker_radius must be positive".into());
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive".into());
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("duration must be non-negative".into());
        }
        self.intrinsics
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.noise.validate().map_err(SimError::InvalidConfig)?;
        self.marker_model()?;
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn timestamp_us(&self, frame: usize) -> u64 {
        (frame as f64 * 1e6 / self.frame_rate).round() as u64
    }
}

/// Independent seeds for the separate random streams of a scenario.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub reflectivity: ReflectivityFrame,
    pub depth: DepthFrame,
    /// World ← rig.
    pub truth_rig: RigidTransform,
    /// World ← camera; the frames carry the corrupted pose.
    pub truth_camera: RigidTransform,
    /// Pixel positions the marker centres were drawn at, jitter included.
    pub marker_pixels: Vec<(f64, f64)>,
    /// Some marker left the image or the short-throw range, so none were
    /// drawn.
    pub out_of_frustum: bool,
}

/// A scenario resolved for a fixed number of frames: paths generated,
/// localisation errors drawn and background texture fixed.
#[derive(Debug, Clone)]
pub struct Scene {
    config: ScenarioConfig,
    camera: PosePath,
    rig: PosePath,
    errors: CameraErrorPath,
    background: Vec<u8>,
    frames: usize,
}

/// Camera-frame centre and ideal pixel position of a marker.
type VisibleMarker = (Vec3, (f64, f64));

impl Scene {
    /// Resolves `config` for `frames` frames and checks that the rig stays
    /// visible throughout.
    pub fn new(config: &ScenarioConfig, frames: usize) -> Result<Self, SimError> {
        config.validate()?;
        let seed = config.seed;
        let span = frames as f64 / config.frame_rate;
        let (camera, rig) = config.motion.resolve(derive_seed(seed, 1), span);
        let errors = CameraErrorPath::new(
            &config.noise,
            derive_seed(seed, 2),
            config.frame_rate,
            frames,
            config.calibration_frames,
        );
        let background =
            background_texture(&config.intrinsics, config.distractors, derive_seed(seed, 3));
        let scene = Self {
            config: config.clone(),
            camera,
            rig,
            errors,
            background,
            frames,
        };
        for k in 0..frames {
            if let Err(marker) = scene.visible_markers(k) {
                return Err(SimError::OutOfRange { frame: k, marker });
            }
        }
        Ok(scene)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 / self.config.frame_rate
    }

    pub fn truth_rig(&self, k: usize) -> RigidTransform {
        self.rig.at(self.time(k))
    }

    pub fn truth_camera(&self, k: usize) -> RigidTransform {
        self.camera.at(self.time(k))
    }

    /// Pose the headset reports for frame `k`.
    pub fn reported_camera(&self, k: usize) -> RigidTransform {
        self.errors.get(k).corrupt(&self.truth_camera(k))
    }

    pub fn camera_error(&self, k: usize) -> PoseOffset {
        self.errors.get(k)
    }

    /// Camera-frame marker centres and their ideal pixel positions, or the
    /// index of the first marker that is out of range or out of the image.
    fn visible_markers(&self, k: usize) -> Result<Vec<VisibleMarker>, usize> {
        let intr = &self.config.intrinsics;
        let camera_from_rig = self.truth_camera(k).invert().compose(&self.truth_rig(k));
        let mut out = Vec::with_capacity(self.config.marker_rig.len());
        for (i, m) in self.config.marker_rig.iter().enumerate() {
            let p = camera_from_rig.apply(*m);
            if !(SHORT_THROW_RANGE.0..=SHORT_THROW_RANGE.1).contains(&p.z) {
                return Err(i);
            }
            let (u, v) = intr.project(p);
            let (u, v) = if intr.has_distortion() {
                intr.distort_pixel(u, v)
            } else {
                (u, v)
            };
            let r = intr.f * self.config.marker_radius / p.z + 1.0;
            if u < r || v < r || u > intr.width as f64 - 1.0 - r || v > intr.height as f64 - 1.0 - r
            {
                return Err(i);
            }
            out.push((p, (u, v)));
        }
        Ok(out)
    }

    /// Renders frame `k`. Rendering depends only on the scene and `k`.
    pub fn render(&self, k: usize) -> RenderedFrame {
        let c = &self.config;
        let intr = &c.intrinsics;
        let (w, h) = (intr.width, intr.height);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(c.seed, 4));
        rng.set_stream(k as u64);
        let mut pixels = self.background.clone();
        let mut depths = vec![0.0f32; w * h];
        let mut marker_pixels = Vec::new();
        let visible = self.visible_markers(k);
        let out_of_frustum = visible.is_err();

        if let Ok(mut markers) = visible {
            // far to near, so nearer discs cover farther ones
            markers.sort_by(|a, b| b.0.z.total_cmp(&a.0.z));
            let jitter = Normal::new(0.0, c.noise.pixel_jitter_sigma).expect("validated sigma");
            let depth_noise = Normal::new(0.0, c.noise.depth_sigma).expect("validated sigma");
            for (p, (u, v)) in markers {
                let (u, v) = (u + jitter.sample(&mut rng), v + jitter.sample(&mut rng));
                marker_pixels.push((u, v));
                let r = intr.f * c.marker_radius / p.z;
                let (x0, x1) = (
                    (u - r).ceil().max(0.0) as usize,
                    ((u + r).floor() as usize).min(w - 1),
                );
                let (y0, y1) = (
                    (v - r).ceil().max(0.0) as usize,
                    ((v + r).floor() as usize).min(h - 1),
                );
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let (dx, dy) = (x as f64 - u, y as f64 - v);
                        if dx * dx + dy * dy <= r * r {
                            pixels[y * w + x] = MARKER_INTENSITY;
                            depths[y * w + x] = (p.z + depth_noise.sample(&mut rng)) as f32;
                        }
                    }
                }
            }
        }

        let t_us = c.timestamp_us(k);
        let reported = self.reported_camera(k);
        RenderedFrame {
            reflectivity: ReflectivityFrame::new(w, h, pixels, t_us, reported)
                .expect("sized to the intrinsics"),
            depth: DepthFrame::new(w, h, depths, t_us, reported).expect("sized to the intrinsics"),
            truth_rig: self.truth_rig(k),
            truth_camera: self.truth_camera(k),
            marker_pixels,
            out_of_frustum,
        }
    }
}

/// Uniform low-intensity texture with a few small bright patches that stay
/// just below the marker threshold.
fn background_texture(intr: &CameraIntrinsics, distractors: usize, seed: u64) -> Vec<u8> {
    let (w, h) = (intr.width, intr.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels: Vec<u8> = (0..w * h)
        .map(|_| rng.random_range(BACKGROUND.0..=BACKGROUND.1))
        .collect();
    for _ in 0..distractors {
        let (pw, ph) = (rng.random_range(3..=8), rng.random_range(3..=8));
        let x0 = rng.random_range(0..w.saturating_sub(pw).max(1));
        let y0 = rng.random_range(0..h.saturating_sub(ph).max(1));
        for y in y0..(y0 + ph).min(h) {
            for x in x0..(x0 + pw).min(w) {
                pixels[y * w + x] = rng.random_range(DISTRACTOR.0..=DISTRACTOR.1);
            }
        }
    }
    pixels
}
