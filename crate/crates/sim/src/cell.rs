//! A simulated robot work cell for the referencing chain: a six-joint arm
//! standing on a floor, with boxes and sensor speckle as clutter.

use irtrack_cloud::{
    pose_chain, reference_robot, Joint, JointType, KinematicChain, Link, PointCloud,
    ReferencingConfig, ReferencingError,
};
use irtrack_core::{angular_distance, RigidTransform, UnitQuaternion, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::trajectory::random_tilt;

/// Axis-aligned box given by its low corner and size, home-pose base frame.
type Cuboid = (Vec3, Vec3);

/// A link: the joint that drives it (axis, point on axis) and its boxes.
type LinkLayout = (Option<(Vec3, Vec3)>, Vec<Cuboid>);

fn arm_layout() -> Vec<LinkLayout> {
    let z = Vec3::new(0.0, 0.0, 1.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let o = |h: f64| Vec3::new(0.0, 0.0, h);
    vec![
        (
            None,
            vec![(Vec3::new(-0.09, -0.09, 0.0), Vec3::new(0.18, 0.18, 0.12))],
        ),
        (
            Some((z, o(0.0))),
            vec![
                (Vec3::new(-0.07, -0.07, 0.12), Vec3::new(0.14, 0.14, 0.1)),
                (Vec3::new(-0.06, 0.07, 0.15), Vec3::new(0.12, 0.05, 0.1)),
            ],
        ),
        (
            Some((y, o(0.2))),
            vec![(Vec3::new(-0.05, 0.12, 0.15), Vec3::new(0.1, 0.08, 0.5))],
        ),
        (
            Some((y, o(0.6))),
            vec![(Vec3::new(-0.04, 0.02, 0.55), Vec3::new(0.08, 0.1, 0.4))],
        ),
        (
            Some((z, o(0.95))),
            vec![(Vec3::new(-0.035, 0.0, 0.95), Vec3::new(0.07, 0.07, 0.08))],
        ),
        (
            Some((y, o(1.05))),
            vec![(Vec3::new(-0.035, -0.03, 1.03), Vec3::new(0.07, 0.1, 0.07))],
        ),
        (
            Some((z, o(1.1))),
            vec![
                (Vec3::new(-0.03, -0.03, 1.1), Vec3::new(0.06, 0.06, 0.03)),
                (Vec3::new(-0.05, -0.02, 1.13), Vec3::new(0.1, 0.02, 0.07)),
            ],
        ),
    ]
}

/// Joint limits used for random arm poses, radians.
const JOINT_LIMITS: [(f64, f64); 6] = [
    (-3.1, 3.1),
    (-0.7, 0.7),
    (-1.2, 1.2),
    (-3.1, 3.1),
    (-1.5, 1.5),
    (-3.1, 3.1),
];

/// Random points on the surfaces of `boxes`, about one per `spacing²`.
pub fn sample_boxes(boxes: &[Cuboid], spacing: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for &(lo, size) in boxes {
        let s = size.to_array();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let n = (s[u] * s[v] / (spacing * spacing)).round() as usize;
            for side in [0.0, s[axis]] {
                for _ in 0..n {
                    let mut c = [0.0; 3];
                    c[axis] = side;
                    c[u] = rng.random_range(0.0..s[u]);
                    c[v] = rng.random_range(0.0..s[v]);
                    pts.push(lo + Vec3::new(c[0], c[1], c[2]));
                }
            }
        }
    }
    pts
}

/// Six-joint arm with surface samples at `spacing`.
pub fn arm_chain(spacing: f64, seed: u64) -> KinematicChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let links = arm_layout()
        .into_iter()
        .map(|(joint, boxes)| Link {
            points: PointCloud::new(sample_boxes(&boxes, spacing, &mut rng)),
            joint: joint.map(|(axis, origin)| Joint {
                axis,
                origin,
                kind: JointType::Revolute,
            }),
        })
        .collect();
    KinematicChain { links }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellConfig {
    /// Sample spacing of the robot model cloud, meters.
    pub model_spacing: f64,
    /// Sample spacing of sensed surfaces, meters.
    pub scene_spacing: f64,
    /// The floor covers this distance around the robot base, meters.
    pub floor_half_extent: f64,
    /// Share of clutter among scene points; half boxes, half speckle.
    pub clutter_fraction: f64,
    /// Gaussian noise on sensed points, meters.
    pub sensor_sigma: f64,
    /// Robot-free radius around the base where no clutter boxes stand.
    pub workspace_radius: f64,
    /// Largest seed position offset, meters.
    pub seed_translation: f64,
    /// Largest seed rotation offset, degrees.
    pub seed_rotation_deg: f64,
    pub referencing: ReferencingConfig,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            model_spacing: 0.01,
            scene_spacing: 0.008,
            floor_half_extent: 1.4,
            clutter_fraction: 0.3,
            sensor_sigma: 0.003,
            workspace_radius: 1.0,
            seed_translation: 0.2,
            seed_rotation_deg: 20.0,
            referencing: ReferencingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScene {
    /// Sensed world cloud: robot, floor and clutter with noise.
    pub cloud: PointCloud,
    /// World ← robot base.
    pub truth: RigidTransform,
    pub joints: Vec<f64>,
    /// The user's first guess of the base pose.
    pub seed: RigidTransform,
    pub clutter_points: usize,
}

fn random_joints(rng: &mut ChaCha8Rng, chain: &KinematicChain, reach: f64) -> Vec<f64> {
    loop {
        let q: Vec<f64> = JOINT_LIMITS
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        let posed = pose_chain(chain, &q).expect("six joints");
        // keep the arm above the floor and inside its workspace
        let base_links = chain.links[0].points.len() + chain.links[1].points.len();
        let ok = posed.points[base_links..]
            .iter()
            .all(|p| p.z > 0.05 && (p.x * p.x + p.y * p.y).sqrt() < reach);
        if ok {
            return q;
        }
    }
}

/// A random cell: base pose, arm pose, clutter, and a seed within the
/// configured offset of the true base pose.
pub fn cell_scene(config: &CellConfig, chain: &KinematicChain, seed: u64) -> CellScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let truth = RigidTransform::new(
        UnitQuaternion::from_rotation_vector(Vec3::new(0.0, 0.0, yaw)),
        Vec3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            0.0,
        ),
    );
    let joints = random_joints(&mut rng, chain, config.workspace_radius - 0.05);

    // sensed robot surfaces, sampled independently of the model
    let sensed = arm_chain(config.scene_spacing, rng.random());
    let robot = pose_chain(&sensed, &joints).expect("six joints");
    let mut base_frame: Vec<Vec3> = robot.points;

    let e = config.floor_half_extent;
    let floor_n = ((2.0 * e) * (2.0 * e) / (config.scene_spacing * config.scene_spacing)) as usize;
    for _ in 0..floor_n {
        let p = Vec3::new(rng.random_range(-e..e), rng.random_range(-e..e), 0.0);
        // the base plate hides the floor beneath it
        if p.x.abs() > 0.09 || p.y.abs() > 0.09 {
            base_frame.push(p);
        }
    }

    let clean = base_frame.len();
    let clutter =
        (config.clutter_fraction / (1.0 - config.clutter_fraction) * clean as f64) as usize;
    let mut boxes_pts = Vec::with_capacity(clutter / 2);
    while boxes_pts.len() < clutter / 2 {
        let size = Vec3::new(
            rng.random_range(0.1..0.4),
            rng.random_range(0.1..0.4),
            rng.random_range(0.1..0.6),
        );
        let bearing = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(config.workspace_radius..e.max(config.workspace_radius + 0.1));
        let lo = Vec3::new(r * bearing.cos(), r * bearing.sin(), 0.0);
        let mut pts = sample_boxes(&[(lo, size)], config.scene_spacing, &mut rng);
        pts.retain(|p| p.z > 0.0);
        pts.truncate(clutter / 2 - boxes_pts.len());
        boxes_pts.extend(pts);
    }
    base_frame.extend(boxes_pts);
    let height = 1.5;
    while base_frame.len() < clean + clutter {
        base_frame.push(Vec3::new(
            rng.random_range(-e..e),
            rng.random_range(-e..e),
            rng.random_range(0.0..height),
        ));
    }

    let noise = Normal::new(0.0, config.sensor_sigma).expect("non-negative sigma");
    let cloud = base_frame
        .iter()
        .map(|p| {
            let n = Vec3::new(
                noise.sample(&mut rng),
                noise.sample(&mut rng),
                noise.sample(&mut rng),
            );
            truth.apply(*p) + n
        })
        .collect();

    let offset_dir = loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if let Some(u) = v.normalized() {
            break u;
        }
    };
    let offset = RigidTransform::new(
        random_tilt(&mut rng, config.seed_rotation_deg.to_radians()),
        offset_dir * rng.random_range(0.0..=config.seed_translation),
    );
    CellScene {
        cloud,
        truth,
        joints,
        seed: truth.compose(&offset),
        clutter_points: clutter,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTrial {
    /// meters
    pub translation_error: f64,
    /// degrees
    pub rotation_error: f64,
    pub icp_iterations: usize,
    pub rms: f64,
}

/// Builds cell `seed` and references the robot model into it.
pub fn run_cell_trial(
    config: &CellConfig,
    chain: &KinematicChain,
    seed: u64,
) -> Result<CellTrial, ReferencingError> {
    let scene = cell_scene(config, chain, seed);
    let r = reference_robot(
        &scene.cloud,
        chain,
        &scene.joints,
        &scene.seed,
        &config.referencing,
    )?;
    Ok(CellTrial {
        translation_error: (r.transform.translation - scene.truth.translation).norm(),
        rotation_error: angular_distance(r.transform.rotation, scene.truth.rotation).to_degrees(),
        icp_iterations: r.icp.iterations,
        rms: r.icp.rms,
    })
}
