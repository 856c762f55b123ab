use irtrack_core::alignment::solve;
use irtrack_core::correspondence::match_points;
use irtrack_core::interpolation::{interpolate_pose, slerp};
use irtrack_core::{
    angular_distance, MarkerModel, MatchConfig, PoseSource, RigidTransform, TimedPose,
    UnitQuaternion, Vec3,
};
use proptest::prelude::*;

fn vec3(extent: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-extent..extent).prop_map(Vec3::from)
}

fn rotation() -> impl Strategy<Value = UnitQuaternion> {
    prop::array::uniform4(-1.0..1.0f64).prop_filter_map("degenerate", |q| {
        UnitQuaternion::new_normalize(q[0], q[1], q[2], q[3])
    })
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(2.0)).prop_map(|(r, t)| RigidTransform::new(r, t))
}

proptest! {
    #[test]
    fn compose_with_inverse_is_identity(t in transform(), p in vec3(1.0)) {
        let back = t.invert().compose(&t).apply(p);
        prop_assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn solve_is_invariant_to_pair_order(t in transform(), pts in prop::collection::vec(vec3(0.2), 4..9), rot in 0usize..8) {
        let target: Vec<Vec3> = pts.iter().map(|p| t.apply(*p) + Vec3::new(1e-4, 0.0, -1e-4)).collect();
        let Ok(a) = solve(&pts, &target) else { return Ok(()) };
        let k = rot % pts.len();
        let mut pts2 = pts.clone();
        let mut target2 = target.clone();
        pts2.rotate_left(k);
        target2.rotate_left(k);
        let b = solve(&pts2, &target2).unwrap();
        prop_assert!(angular_distance(a.transform.rotation, b.transform.rotation) < 1e-9);
        prop_assert!((a.transform.translation - b.transform.translation).norm() < 1e-9);
        prop_assert!((a.rms_error - b.rms_error).abs() < 1e-9);
    }

    #[test]
    fn slerp_stays_unit_and_hits_endpoints(a in rotation(), b in rotation(), alpha in 0.0..1.0f64) {
        let q = slerp(a, b, alpha);
        let n: f64 = q.to_wxyz().iter().map(|v| v * v).sum();
        prop_assert!((n - 1.0).abs() < 1e-12);
        prop_assert!(angular_distance(slerp(a, b, 1.0), b) < 1e-9);
    }

    #[test]
    fn interpolation_reproduces_uniform_motion(t0 in transform(), v in vec3(0.5), w in vec3(1.0), dt in 1u64..100_000, frac in 0.0..2.0f64) {
        // constant linear and angular velocity through two samples
        let step = RigidTransform::new(UnitQuaternion::from_rotation_vector(w * 0.5), v);
        let p0 = TimedPose::new(1_000, t0, PoseSource::Measured);
        let p1 = TimedPose::new(1_000 + dt, RigidTransform::new(step.rotation * t0.rotation, t0.translation + v), PoseSource::Measured);
        let t = 1_000 + (frac * dt as f64) as u64;
        let a = (t - 1_000) as f64 / dt as f64;
        let got = interpolate_pose(&p0, &p1, t);
        prop_assert!((got.translation - (t0.translation + v * a)).norm() < 1e-9);
        let expected = UnitQuaternion::from_rotation_vector(w * 0.5 * a) * t0.rotation;
        prop_assert!(angular_distance(got.rotation, expected) < 1e-7);
    }

    #[test]
    fn moved_and_shuffled_rig_is_identified(t in transform(), seed in 0u64..1000) {
        let rig = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.0, 0.07, 0.0),
            Vec3::new(0.03, 0.02, 0.05),
            Vec3::new(-0.04, 0.05, 0.015),
        ];
        let model = MarkerModel::new(rig.clone()).unwrap();
        let mut order: Vec<usize> = (0..rig.len()).collect();
        // deterministic shuffle from the seed
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let det: Vec<Vec3> = order.iter().map(|&i| t.apply(rig[i])).collect();
        let set = match_points(&det, &model, &MatchConfig::default()).unwrap();
        prop_assert_eq!(set.len(), rig.len());
        for (d, m) in set.pairs {
            prop_assert_eq!(order[d], m);
        }
    }
}
