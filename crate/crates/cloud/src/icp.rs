//! Seeded point-to-point ICP.

use irtrack_core::alignment::{self, AlignmentError, AlignmentResult};
use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::grid::SpatialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once an iteration lowers the rms by less than this, meters.
    pub min_improvement: f64,
    /// Pairs farther apart than this multiple of the median pair distance are
    /// dropped.
    pub rejection_factor: f64,
    /// Lower bound on the rejection cutoff, meters. Keeps a near-zero median
    /// (exactly coincident samples) from discarding every other pair.
    pub min_cutoff: f64,
    /// Consecutive rms increases tolerated before giving up.
    pub max_increases: usize,
    /// Cell size of the scene's nearest-neighbour grid, meters.
    pub grid_cell: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            min_improvement: 1e-6,
            rejection_factor: 3.0,
            min_cutoff: 0.005,
            max_increases: 5,
            grid_cell: 0.02,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcpError {
    #[error("model and scene clouds must be non-empty")]
    EmptyCloud,
    #[error("rms grew for {0} consecutive iterations")]
    Diverged(usize),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Best alignment found; `transform` maps model points into the scene
    /// and `rms_error` is the trimmed rms of the pairs it was solved from.
    pub alignment: AlignmentResult,
    /// rms over all nearest-neighbour pairs at `alignment.transform`, the
    /// score used to pick the best iterate.
    pub rms: f64,
    pub iterations: usize,
    /// Scores of every iterate that improved on the best so far.
    pub accepted_rms: Vec<f64>,
    pub pairs: usize,
}

/// Extrapolation is attempted only when the last steps turn by less than
/// this, radians.
const ACCEL_MAX_TURN: f64 = 10.0 * std::f64::consts::PI / 180.0;
/// Longest extrapolation, in multiples of the last step.
const ACCEL_MAX_GAIN: f64 = 25.0;

/// Pose parameters about the model centroid: rotation vector scaled by the
/// model radius, and the centroid's image. Both parts are in meters.
#[derive(Clone, Copy)]
struct Params {
    rot: Vec3,
    pos: Vec3,
}

impl Params {
    fn of(t: &RigidTransform, centroid: Vec3, radius: f64) -> Self {
        Self {
            rot: t.rotation.to_rotation_vector() * radius,
            pos: t.apply(centroid),
        }
    }

    fn to_transform(self, centroid: Vec3, radius: f64) -> RigidTransform {
        let q = UnitQuaternion::from_rotation_vector(self.rot * (1.0 / radius));
        RigidTransform::new(q, self.pos - q.rotate(centroid))
    }

    fn sub(self, o: Params) -> [f64; 6] {
        let (r, p) = (self.rot - o.rot, self.pos - o.pos);
        [r.x, r.y, r.z, p.x, p.y, p.z]
    }

    fn step(self, dir: &[f64; 6], s: f64) -> Params {
        Params {
            rot: self.rot + Vec3::new(dir[0], dir[1], dir[2]) * s,
            pos: self.pos + Vec3::new(dir[3], dir[4], dir[5]) * s,
        }
    }
}

fn norm6(v: &[f64; 6]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn turn(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (d / (norm6(a) * norm6(b))).clamp(-1.0, 1.0).acos()
}

/// Position along the last update direction to jump to, from the mean
/// squared errors `e` of three iterates at arc positions `v` (latest first;
/// the freshly solved pose sits at 0). Prefers the parabola's minimum, then
/// the linear fit's zero crossing, capped at `vmax`. `None` when the error
/// is not falling along the path.
fn extrapolation(v: [f64; 3], e: [f64; 3], vmax: f64) -> Option<f64> {
    let slope = (e[0] - e[2]) / (v[0] - v[2]);
    if !(slope < 0.0) {
        return None;
    }
    let linear = v[0] - e[0] / slope;
    let d01 = (e[0] - e[1]) / (v[0] - v[1]);
    let d12 = (e[1] - e[2]) / (v[1] - v[2]);
    let a = (d01 - d12) / (v[0] - v[2]);
    let b = d01 - a * (v[0] + v[1]);
    let parabolic = if a > 0.0 {
        -b / (2.0 * a)
    } else {
        f64::INFINITY
    };
    if parabolic > 0.0 && parabolic < linear && parabolic < vmax {
        Some(parabolic)
    } else if linear > 0.0 {
        Some(linear.min(vmax))
    } else {
        None
    }
}

/// Registers `model` into `scene` starting from `seed` (scene ← model).
///
/// Each iteration pairs every transformed model point with its nearest scene
/// point, drops pairs beyond `rejection_factor ×` the median pair distance,
/// and re-solves the rigid alignment from the original model points. Iterates
/// are scored by the rms over all pairs, since the trimmed rms moves with the
/// rejection set. When three successive updates point the same way the pose
/// is extrapolated along them. The best-scoring transform is returned.
pub fn icp_register(
    model: &PointCloud,
    scene: &PointCloud,
    seed: &RigidTransform,
    config: &IcpConfig,
) -> Result<IcpResult, IcpError> {
    if model.is_empty() || scene.is_empty() {
        return Err(IcpError::EmptyCloud);
    }
    let grid = SpatialGrid::new(&scene.points, config.grid_cell);
    let centroid = Vec3::mean(&model.points).expect("model is non-empty");
    let radius = (model
        .points
        .iter()
        .map(|p| (*p - centroid).norm_squared())
        .sum::<f64>()
        / model.len() as f64)
        .sqrt()
        .max(1e-3);

    let mut current = *seed;
    let mut current_fit: Option<AlignmentResult> = None;
    let mut best: Option<(AlignmentResult, f64, usize)> = None;
    let mut accepted_rms = Vec::new();
    let mut increases = 0;
    let mut last_score = f64::INFINITY;
    let mut iterations = 0;
    // Latest solved iterates, newest last: parameters and mean squared score.
    let mut history: Vec<(Params, f64)> = Vec::with_capacity(3);
    let mut last_dir: Option<[f64; 6]> = None;

    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(model.len());
    let mut source: Vec<Vec3> = Vec::with_capacity(model.len());
    let mut target: Vec<Vec3> = Vec::with_capacity(model.len());
    let mut dists: Vec<f64> = Vec::with_capacity(model.len());

    loop {
        pairs.clear();
        for (i, p) in model.points.iter().enumerate() {
            if let Some((j, d)) = grid.nearest(current.apply(*p)) {
                pairs.push((i, j, d));
            }
        }
        let mse = pairs.iter().map(|p| p.2 * p.2).sum::<f64>() / pairs.len() as f64;
        let score = mse.sqrt();

        dists.clear();
        dists.extend(pairs.iter().map(|p| p.2));
        let mid = dists.len() / 2;
        let median = *dists.select_nth_unstable_by(mid, f64::total_cmp).1;
        let cutoff = (config.rejection_factor * median).max(config.min_cutoff);
        source.clear();
        target.clear();
        for &(i, j, d) in &pairs {
            if d <= cutoff {
                source.push(model.points[i]);
                target.push(scene.points[j]);
            }
        }

        // Score the pose the pairs were built from.
        let fit = match current_fit.take() {
            Some(fit) => fit,
            None => AlignmentResult {
                transform: current,
                ..alignment::solve(&source, &target)?
            },
        };
        if best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((
                AlignmentResult {
                    transform: current,
                    ..fit
                },
                score,
                source.len(),
            ));
            accepted_rms.push(score);
        }
        let improvement = last_score - score;
        last_score = score;
        if improvement < 0.0 {
            increases += 1;
            if increases >= config.max_increases {
                return Err(IcpError::Diverged(increases));
            }
        } else {
            increases = 0;
            if improvement < config.min_improvement {
                break;
            }
        }
        if iterations == config.max_iterations {
            break;
        }
        iterations += 1;

        let result = alignment::solve(&source, &target)?;
        let solved = Params::of(&result.transform, centroid, radius);
        let prev = Params::of(&current, centroid, radius);
        let dir = solved.sub(prev);
        let step = norm6(&dir);
        if history.len() == 3 {
            history.remove(0);
        }
        history.push((prev, mse));
        current = result.transform;
        current_fit = Some(result);

        let aligned = last_dir.is_some_and(|d| step > 0.0 && turn(&d, &dir) < ACCEL_MAX_TURN);
        last_dir = Some(dir);
        if aligned && history.len() == 3 {
            let [(p0, e0), (p1, e1), (p2, e2)] = [history[0], history[1], history[2]];
            let v1 = -norm6(&p2.sub(p1));
            let v0 = v1 - norm6(&p1.sub(p0));
            // Arc positions relative to the freshly solved pose at 0.
            let (a, b, c) = (v0 - step, v1 - step, -step);
            if let Some(s) = extrapolation([c, b, a], [e2, e1, e0], ACCEL_MAX_GAIN * step) {
                let unit = dir.map(|x| x / step);
                current = solved.step(&unit, s).to_transform(centroid, radius);
                current_fit = None;
                history.clear();
                last_dir = None;
            }
        }
    }

    let (alignment, rms, pairs) = best.expect("at least one pose was scored");
    Ok(IcpResult {
        alignment,
        rms,
        iterations,
        accepted_rms,
        pairs,
    })
}
