//! Closed-form least-squares rigid alignment of corresponded point sets.
//!
//! Given pairs `(xᵢ, yᵢ)` the solver finds the rotation `R` and translation
//! `t` minimising `(1/n) Σ |R xᵢ + t − yᵢ|²`. With both sets centred on their
//! means the problem reduces to maximising `tr(Rᵀ C)` for the correlation
//! matrix `C = (1/n) Σ (yᵢ − ȳ)(xᵢ − x̄)ᵀ`. Writing `C = U W Vᵀ`, the maximiser
//! over proper rotations is `R = U diag(1, 1, det(U Vᵀ)) Vᵀ`, and
//! `t = ȳ − R x̄`. The middle factor is what keeps noisy or planar inputs from
//! producing a reflection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, RigidTransform, UnitQuaternion, Vec3};
use crate::interpolation::TimedPose;
use crate::svd::svd3;

/// Ratio of second-largest to largest source-covariance singular value below
/// which the source set is considered collinear.
pub const COLLINEAR_RATIO: f64 = 1e-8;

/// Absolute bound on the two smallest singular values of `C` for the
/// near-degenerate flag.
pub const NEAR_DEGENERATE_SIGMA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("point sets differ in length ({source_len} vs {target_len})")]
    LengthMismatch {
        source_len: usize,
        target_len: usize,
    },
    #[error("at least 3 point pairs are required, got {0}")]
    TooFewPoints(usize),
    #[error("source points are collinear; rotation about the line is unobservable")]
    DegenerateConfiguration,
    #[error("non-finite coordinates in input")]
    NonFinite,
}

/// Corresponded source (`xᵢ`) and target (`yᵢ`) points with uniform weights.
#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    source: Vec<Vec3>,
    target: Vec<Vec3>,
}

impl AlignmentProblem {
    pub fn new(source: Vec<Vec3>, target: Vec<Vec3>) -> Result<Self, AlignmentError> {
        if source.len() != target.len() {
            return Err(AlignmentError::LengthMismatch {
                source_len: source.len(),
                target_len: target.len(),
            });
        }
        if source.len() < 3 {
            return Err(AlignmentError::TooFewPoints(source.len()));
        }
        if !source.iter().chain(&target).all(|p| p.is_finite()) {
            return Err(AlignmentError::NonFinite);
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &[Vec3] {
        &self.source
    }

    pub fn target(&self) -> &[Vec3] {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Mean of the source and of the target points.
    pub fn centroids(&self) -> (Vec3, Vec3) {
        centroids(&self.source, &self.target)
    }

    /// `C = (1/n) Σ (yᵢ − ȳ)(xᵢ − x̄)ᵀ`.
    pub fn correlation_matrix(&self) -> Mat3 {
        let (x_mean, y_mean) = self.centroids();
        let mut c = Mat3::ZERO;
        for (x, y) in self.source.iter().zip(&self.target) {
            c = c + (*y - y_mean).outer(*x - x_mean);
        }
        c.scale(1.0 / self.len() as f64)
    }

    fn source_covariance(&self, x_mean: Vec3) -> Mat3 {
        let mut c = Mat3::ZERO;
        for x in &self.source {
            let d = *x - x_mean;
            c = c + d.outer(d);
        }
        c.scale(1.0 / self.len() as f64)
    }

    pub fn solve(&self) -> Result<AlignmentResult, AlignmentError> {
        let (x_mean, y_mean) = self.centroids();

        let cov = svd3(&self.source_covariance(x_mean)).singular_values;
        if cov[0] <= 0.0 || cov[1] / cov[0] < COLLINEAR_RATIO {
            return Err(AlignmentError::DegenerateConfiguration);
        }

        let c = self.correlation_matrix();
        let svd = svd3(&c);
        let d = (svd.u.determinant() * svd.v.determinant()).signum();
        let r = svd.u * Mat3::from_diagonal([1.0, 1.0, d]) * svd.v.transpose();
        // U and V are orthonormal to rounding, so R always converts.
        let rotation = UnitQuaternion::from_rotation_matrix(&r)
            .expect("product of orthonormal factors is a rotation");

        let translation = y_mean - rotation.rotate(x_mean);
        let transform = RigidTransform::new(rotation, translation);

        let sigma = svd.singular_values;
        let condition = if sigma[1] < NEAR_DEGENERATE_SIGMA && sigma[2] < NEAR_DEGENERATE_SIGMA {
            ConditionFlag::NearDegenerate
        } else {
            ConditionFlag::WellPosed
        };

        Ok(AlignmentResult {
            transform,
            rms_error: rms_error(&transform, &self.source, &self.target),
            condition,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionFlag {
    WellPosed,
    NearDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// Maps source points onto target points.
    pub transform: RigidTransform,
    /// `sqrt((1/n) Σ |R xᵢ + t − yᵢ|²)` in meters.
    pub rms_error: f64,
    pub condition: ConditionFlag,
}

pub fn centroids(source: &[Vec3], target: &[Vec3]) -> (Vec3, Vec3) {
    (
        Vec3::mean(source).unwrap_or_default(),
        Vec3::mean(target).unwrap_or_default(),
    )
}

pub fn rms_error(transform: &RigidTransform, source: &[Vec3], target: &[Vec3]) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let sum: f64 = source
        .iter()
        .zip(target)
        .map(|(x, y)| (transform.apply(*x) - *y).norm_squared())
        .sum();
    (sum / source.len() as f64).sqrt()
}

/// Convenience wrapper around [`AlignmentProblem::solve`].
pub fn solve(source: &[Vec3], target: &[Vec3]) -> Result<AlignmentResult, AlignmentError> {
    AlignmentProblem::new(source.to_vec(), target.to_vec())?.solve()
}

/// Transform mapping estimated positions onto truth positions, fitted over
/// timestamp-paired samples.
///
/// Only positions enter the fit, so the samples must not all lie on a line.
pub fn align_pose_samples(
    estimated: &[TimedPose],
    truth: &[TimedPose],
) -> Result<RigidTransform, AlignmentError> {
    if estimated.len() != truth.len() {
        return Err(AlignmentError::LengthMismatch {
            source_len: estimated.len(),
            target_len: truth.len(),
        });
    }
    let source = estimated.iter().map(|s| s.pose.translation).collect();
    let target = truth.iter().map(|s| s.pose.translation).collect();
    Ok(AlignmentProblem::new(source, target)?.solve()?.transform)
}

/// Like [`align_pose_samples`], but each pose contributes the images of
/// `probes` (points in the tracked body's frame), which makes the fit
/// well-posed for a body that never moves.
pub fn align_pose_probes(
    estimated: &[TimedPose],
    truth: &[TimedPose],
    probes: &[Vec3],
) -> Result<RigidTransform, AlignmentError> {
    if estimated.len() != truth.len() {
        return Err(AlignmentError::LengthMismatch {
            source_len: estimated.len(),
            target_len: truth.len(),
        });
    }
    let mut source = Vec::with_capacity(estimated.len() * probes.len());
    let mut target = Vec::with_capacity(estimated.len() * probes.len());
    for (e, t) in estimated.iter().zip(truth) {
        for p in probes {
            source.push(e.pose.apply(*p));
            target.push(t.pose.apply(*p));
        }
    }
    Ok(AlignmentProblem::new(source, target)?.solve()?.transform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angular_distance;
    use crate::interpolation::PoseSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (0.1..=1.0).contains(&n) {
                return UnitQuaternion::new_normalize(q[0], q[1], q[2], q[3]).unwrap();
            }
        }
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                )
            })
            .collect()
    }

    fn problem(source: &[Vec3], target: &[Vec3]) -> AlignmentProblem {
        AlignmentProblem::new(source.to_vec(), target.to_vec()).unwrap()
    }

    #[test]
    fn centroid_examples() {
        let p = [Vec3::new(1.0, 2.0, 3.0)];
        assert_eq!(centroids(&p, &p), (p[0], p[0]));
        let pair = [Vec3::X, -Vec3::X];
        assert_eq!(centroids(&pair, &pair).0, Vec3::ZERO);
        let tri = [
            Vec3::ZERO,
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(0.0, 3.0, 0.0),
        ];
        assert_eq!(centroids(&tri, &tri).0, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn correlation_matrix_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = random_points(&mut rng, 6, 1.0);
        let c = problem(&src, &src).correlation_matrix();
        assert!((c - c.transpose()).frobenius_norm() < 1e-15);
        let svd = svd3(&c);
        assert!(
            (svd.u.transpose() * svd.v - Mat3::IDENTITY).frobenius_norm() < 1e-9,
            "PSD"
        );

        // zero-mean source, pure rotation: C = R · Cov(source)
        let mean = Vec3::mean(&src).unwrap();
        let centred: Vec<Vec3> = src.iter().map(|p| *p - mean).collect();
        let q = random_rotation(&mut rng);
        let rotated: Vec<Vec3> = centred.iter().map(|p| q.rotate(*p)).collect();
        let cov = problem(&centred, &centred).correlation_matrix();
        let c = problem(&centred, &rotated).correlation_matrix();
        assert!((c - q.to_rotation_matrix() * cov).frobenius_norm() < 1e-12);

        let same = vec![Vec3::new(0.2, 0.3, 0.4); 4];
        assert_eq!(problem(&same, &same).correlation_matrix(), Mat3::ZERO);
    }

    #[test]
    fn identity_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_points(&mut rng, 5, 1.0);
        let r = problem(&src, &src).solve().unwrap();
        assert!(r.transform.rotation.angle() < 1e-12);
        assert!(r.transform.translation.norm() < 1e-12);
        assert!(r.rms_error < 1e-12);
        assert_eq!(r.condition, ConditionFlag::WellPosed);
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let truth = RigidTransform::new(
                random_rotation(&mut rng),
                random_points(&mut rng, 1, 2.0)[0],
            );
            let src = random_points(&mut rng, 5, 1.0);
            let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(*p)).collect();
            let r = problem(&src, &dst).solve().unwrap();
            assert!(angular_distance(r.transform.rotation, truth.rotation) < 1e-9);
            assert!((r.transform.translation - truth.translation).norm() < 1e-9);
            // t = ȳ − R x̄
            let (xm, ym) = centroids(&src, &dst);
            let t = ym - r.transform.rotation.rotate(xm);
            assert!((t - r.transform.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn collinear_source_is_degenerate() {
        let src: Vec<Vec3> = (0..5)
            .map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.5))
            .collect();
        let dst = src.clone();
        assert_eq!(
            problem(&src, &dst).solve(),
            Err(AlignmentError::DegenerateConfiguration)
        );
        let same = vec![Vec3::X; 4];
        assert_eq!(
            problem(&same, &same).solve(),
            Err(AlignmentError::DegenerateConfiguration)
        );
        assert_eq!(
            AlignmentProblem::new(vec![Vec3::X; 2], vec![Vec3::X; 2]).unwrap_err(),
            AlignmentError::TooFewPoints(2)
        );
    }

    #[test]
    fn collapsed_target_is_flagged_near_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_points(&mut rng, 6, 1.0);
        let dst: Vec<Vec3> = src.iter().map(|p| Vec3::new(p.x, 0.0, 0.0)).collect();
        let r = problem(&src, &dst).solve().unwrap();
        assert_eq!(r.condition, ConditionFlag::NearDegenerate);
        assert!((r.transform.rotation.to_rotation_matrix().determinant() - 1.0).abs() < 1e-9);
    }

    /// Minimum RMS over rotations found by a dense grid over rotation vectors
    /// followed by shrinking pattern search; the translation is optimal for
    /// each rotation (`t = ȳ − R x̄`).
    fn grid_search_min_rms(src: &[Vec3], dst: &[Vec3]) -> f64 {
        let (xm, ym) = centroids(src, dst);
        let cost = |v: Vec3| {
            let q = UnitQuaternion::from_rotation_vector(v);
            let t = RigidTransform::new(q, ym - q.rotate(xm));
            rms_error(&t, src, dst)
        };
        let steps = 24;
        let mut best = (f64::INFINITY, Vec3::ZERO);
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let f = |n: usize| {
                        -std::f64::consts::PI + 2.0 * std::f64::consts::PI * n as f64 / steps as f64
                    };
                    let v = Vec3::new(f(i), f(j), f(k));
                    if v.norm() > std::f64::consts::PI + 0.3 {
                        continue;
                    }
                    let c = cost(v);
                    if c < best.0 {
                        best = (c, v);
                    }
                }
            }
        }
        let mut step = 0.2;
        while step > 1e-9 {
            let mut improved = false;
            for axis in [Vec3::X, Vec3::Y, Vec3::Z] {
                for sign in [-1.0, 1.0] {
                    let v = best.1 + axis * (sign * step);
                    let c = cost(v);
                    if c < best.0 {
                        best = (c, v);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best.0
    }

    #[test]
    fn mirrored_noisy_planar_set_still_yields_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reflected_cases = 0;
        for _ in 0..20 {
            let src: Vec<Vec3> = (0..6)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        0.0,
                    )
                })
                .collect();
            let q = random_rotation(&mut rng);
            let dst: Vec<Vec3> = src
                .iter()
                .map(|p| {
                    q.rotate(Vec3::new(-p.x, p.y, p.z))
                        + Vec3::new(
                            rng.random_range(-0.4..0.4),
                            rng.random_range(-0.4..0.4),
                            rng.random_range(-0.4..0.4),
                        )
                })
                .collect();
            let p = problem(&src, &dst);
            let svd = svd3(&p.correlation_matrix());
            if svd.u.determinant() * svd.v.determinant() < 0.0 {
                reflected_cases += 1;
            }
            let r = p.solve().unwrap();
            let det = r.transform.rotation.to_rotation_matrix().determinant();
            assert!((det - 1.0).abs() < 1e-9);
            let oracle = grid_search_min_rms(&src, &dst);
            assert!(
                r.rms_error <= oracle + 1e-9,
                "solver {} worse than grid {}",
                r.rms_error,
                oracle
            );
            assert!(
                (r.rms_error - oracle).abs() < 1e-4,
                "solver {} grid {}",
                r.rms_error,
                oracle
            );
        }
        assert!(
            reflected_cases > 0,
            "scenario must exercise the det(UVᵀ) = −1 branch"
        );
    }

    #[test]
    fn optimality_against_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let src = random_points(&mut rng, 7, 1.0);
        let truth = RigidTransform::new(random_rotation(&mut rng), Vec3::new(0.3, -0.2, 1.0));
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| truth.apply(*p) + random_points(&mut rng, 1, 0.05)[0])
            .collect();
        let r = problem(&src, &dst).solve().unwrap();
        let (xm, ym) = centroids(&src, &dst);
        for _ in 0..100_000 {
            let q = random_rotation(&mut rng);
            let t = RigidTransform::new(q, ym - q.rotate(xm));
            assert!(r.rms_error <= rms_error(&t, &src, &dst) + 1e-12);
        }
    }

    #[test]
    fn common_pre_rotation_conjugates_answer() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src = random_points(&mut rng, 6, 1.0);
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| {
                random_rotation(&mut ChaCha8Rng::seed_from_u64(99)).rotate(*p)
                    + random_points(&mut rng, 1, 0.1)[0]
            })
            .collect();
        let r = problem(&src, &dst).solve().unwrap().transform.rotation;
        let qq = random_rotation(&mut rng);
        let src2: Vec<Vec3> = src.iter().map(|p| qq.rotate(*p)).collect();
        let dst2: Vec<Vec3> = dst.iter().map(|p| qq.rotate(*p)).collect();
        let r2 = problem(&src2, &dst2).solve().unwrap().transform.rotation;
        assert!(angular_distance(r2, qq * r * qq.inverse()) < 1e-9);
    }

    fn poses(positions: &[Vec3]) -> Vec<TimedPose> {
        positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                TimedPose::new(
                    i as u64,
                    RigidTransform::from_translation(*p),
                    PoseSource::Measured,
                )
            })
            .collect()
    }

    #[test]
    fn pose_sample_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(&mut rng, 10, 1.0);
        let est = poses(&pts);
        let t = align_pose_samples(&est, &est).unwrap();
        assert!(t.translation.norm() < 1e-12 && t.rotation.angle() < 1e-12);

        let shifted: Vec<Vec3> = pts.iter().map(|p| *p + Vec3::new(0.1, 0.0, 0.0)).collect();
        let t = align_pose_samples(&est, &poses(&shifted)).unwrap();
        assert!((t.translation - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-12);
        assert!(t.rotation.angle() < 1e-12);

        let still = poses(&[Vec3::new(0.1, 0.2, 0.6); 5]);
        assert_eq!(
            align_pose_samples(&still, &still),
            Err(AlignmentError::DegenerateConfiguration)
        );
        let probes = [Vec3::ZERO, Vec3::X * 0.1, Vec3::Y * 0.1, Vec3::Z * 0.1];
        let t = align_pose_probes(&still, &still, &probes).unwrap();
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn thousand_noisy_samples_recover_frame_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let offset = RigidTransform::new(random_rotation(&mut rng), Vec3::new(1.5, -0.4, 0.8));
        let est_pts = random_points(&mut rng, 1000, 0.5);
        let truth_pts: Vec<Vec3> = est_pts
            .iter()
            .map(|p| {
                let n = Vec3::new(
                    rng.random_range(-1.0..1.0f64),
                    rng.random_range(-1.0..1.0f64),
                    rng.random_range(-1.0..1.0f64),
                ) * (0.001 * 3f64.sqrt());
                offset.apply(*p) + n
            })
            .collect();
        let t = align_pose_samples(&poses(&est_pts), &poses(&truth_pts)).unwrap();
        for p in &est_pts[..50] {
            assert!((t.apply(*p) - offset.apply(*p)).norm() < 2e-4);
        }
    }
}
