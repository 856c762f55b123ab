use irtrack_cloud::filters::voxel_index;
use irtrack_cloud::{icp_register, voxel_downsample, IcpConfig, IcpError, PointCloud};
use irtrack_core::{angular_distance, RigidTransform, UnitQuaternion, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Random surface samples of three boxes of different sizes forming an
/// L-shaped, asymmetric object about 70 cm across, roughly robot-sized.
/// `spacing` is the mean distance between neighbouring samples.
fn asymmetric_object(spacing: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pts = Vec::new();
    for (lo, size) in OBJECT_BOXES {
        let s = [size.x, size.y, size.z];
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
    PointCloud::new(pts)
}

const OBJECT_BOXES: [(Vec3, Vec3); 3] = [
    (Vec3::new(-0.3, -0.1, 0.0), Vec3::new(0.6, 0.2, 0.16)),
    (Vec3::new(-0.3, 0.1, 0.0), Vec3::new(0.16, 0.5, 0.24)),
    (Vec3::new(0.1, 0.1, 0.0), Vec3::new(0.12, 0.12, 0.6)),
];

/// Surface samples of small boxes standing around the object, as in a
/// cluttered work cell. Each box is 5 to 20 cm across and keeps at least
/// 10 cm clearance from the object.
fn clutter_objects(rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec3> {
    let clearance = 0.1;
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let s = [
            rng.random_range(0.05..0.2),
            rng.random_range(0.05..0.2),
            rng.random_range(0.05..0.2),
        ];
        let lo = Vec3::new(
            rng.random_range(-0.9..0.7),
            rng.random_range(-0.7..1.0),
            rng.random_range(0.0..0.4),
        );
        let hi = lo + Vec3::new(s[0], s[1], s[2]);
        let overlaps = OBJECT_BOXES.iter().any(|&(blo, size)| {
            let bhi = blo + size;
            lo.x < bhi.x + clearance
                && hi.x > blo.x - clearance
                && lo.y < bhi.y + clearance
                && hi.y > blo.y - clearance
                && lo.z < bhi.z + clearance
                && hi.z > blo.z - clearance
        });
        if overlaps {
            continue;
        }
        for _ in 0..400.min(count - pts.len()) {
            let axis = rng.random_range(0..3);
            let mut c = [
                rng.random_range(0.0..s[0]),
                rng.random_range(0.0..s[1]),
                rng.random_range(0.0..s[2]),
            ];
            c[axis] = if rng.random_bool(0.5) { 0.0 } else { s[axis] };
            pts.push(lo + Vec3::new(c[0], c[1], c[2]));
        }
    }
    pts
}

fn offset_within(rng: &mut ChaCha8Rng, max_t: f64, max_deg: f64) -> RigidTransform {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let angle = rng.random_range(0.0..max_deg).to_radians();
    let dir = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let t = dir.normalized().unwrap() * rng.random_range(0.0..max_t);
    RigidTransform::new(UnitQuaternion::from_axis_angle(axis, angle).unwrap(), t)
}

fn errors(a: &RigidTransform, b: &RigidTransform) -> (f64, f64) {
    (
        (a.translation - b.translation).norm(),
        angular_distance(a.rotation, b.rotation).to_degrees(),
    )
}

#[test]
fn identity_registration() {
    let model = asymmetric_object(0.01);
    let r = icp_register(
        &model,
        &model,
        &RigidTransform::IDENTITY,
        &IcpConfig::default(),
    )
    .unwrap();
    let (dt, da) = errors(&r.alignment.transform, &RigidTransform::IDENTITY);
    assert!(dt < 1e-12 && da < 1e-9);
    assert!(r.alignment.rms_error < 1e-12);
}

#[test]
fn noiseless_recovery_from_offset_seed() {
    let model = asymmetric_object(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = IcpConfig::default();
    let mut ok = 0;
    let trials = 20;
    for _ in 0..trials {
        let truth = RigidTransform::new(
            UnitQuaternion::from_axis_angle(Vec3::new(0.1, 0.2, 1.0), rng.random_range(-3.0..3.0))
                .unwrap(),
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                0.5,
            ),
        );
        let scene = model.transformed(&truth);
        let seed = truth.compose(&offset_within(&mut rng, 0.2, 20.0));
        if let Ok(r) = icp_register(&model, &scene, &seed, &config) {
            let (dt, da) = errors(&r.alignment.transform, &truth);
            if dt < 0.001 && da < 0.2 {
                ok += 1;
            }
        }
    }
    assert!(ok >= trials - 1, "{ok} of {trials} converged");
}

#[test]
fn noisy_cluttered_recovery() {
    let model = asymmetric_object(0.008);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let noise = Normal::new(0.0, 0.003).unwrap();
    let config = IcpConfig::default();
    let mut ok = 0;
    let trials = 10;
    for _ in 0..trials {
        let truth = offset_within(&mut rng, 1.0, 180.0);
        let mut scene: Vec<Vec3> = model
            .transformed(&truth)
            .points
            .iter()
            .map(|p| {
                *p + Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                )
            })
            .collect();
        let clutter = (0.3 / 0.7 * scene.len() as f64) as usize;
        scene.extend(
            clutter_objects(&mut rng, clutter)
                .into_iter()
                .map(|p| truth.apply(p)),
        );
        let seed = truth.compose(&offset_within(&mut rng, 0.2, 20.0));
        if let Ok(r) = icp_register(&model, &PointCloud::new(scene), &seed, &config) {
            let (dt, da) = errors(&r.alignment.transform, &truth);
            if dt < 0.005 && da < 1.0 {
                ok += 1;
            }
        }
    }
    assert!(ok >= trials - 1, "{ok} of {trials} within 5 mm / 1°");
}

#[test]
fn accepted_rms_never_increases() {
    let model = asymmetric_object(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        let truth = offset_within(&mut rng, 0.5, 90.0);
        let scene = model.transformed(&truth);
        let seed = truth.compose(&offset_within(&mut rng, 0.3, 40.0));
        let Ok(r) = icp_register(&model, &scene, &seed, &IcpConfig::default()) else {
            continue;
        };
        assert!(r.accepted_rms.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*r.accepted_rms.last().unwrap(), r.rms);
    }
}

#[test]
fn empty_clouds_are_rejected() {
    let model = asymmetric_object(0.02);
    let empty = PointCloud::default();
    let seed = RigidTransform::IDENTITY;
    assert_eq!(
        icp_register(&empty, &model, &seed, &IcpConfig::default()),
        Err(IcpError::EmptyCloud)
    );
    assert_eq!(
        icp_register(&model, &empty, &seed, &IcpConfig::default()),
        Err(IcpError::EmptyCloud)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxel_output_has_one_point_per_voxel(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..400),
        leaf in 0.05f64..0.5,
    ) {
        let cloud: PointCloud = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
        let out = voxel_downsample(&cloud, leaf);
        let mut keys: Vec<_> = out.points.iter().map(|p| voxel_index(*p, leaf)).collect();
        let n = keys.len();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
        let mut input: Vec<_> = cloud.points.iter().map(|p| voxel_index(*p, leaf)).collect();
        input.sort();
        input.dedup();
        prop_assert_eq!(input, keys);
    }
}
