use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use irtrack_runtime::wire::{PoseMessage, WireError, FLAG_PREDICTED, FLAG_STALE};
use proptest::prelude::*;

/// Identity pose, sequence 0, time 0, no flags, assembled field by field.
const IDENTITY_FIXTURE: [u8; 78] = [
    0x49, 0x52, 0x54, 0x4B, // magic
    0x01, // version
    0x00, // flags
    0x00, 0x00, 0x00, 0x00, // sequence
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // timestamp
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // px
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // py
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // pz
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xF0, 0x3F, // qw = 1.0
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // qx
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // qy
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // qz
    0x00, 0x00, 0x00, 0x00, // reserved
];

#[test]
fn golden_identity_message() {
    let m = PoseMessage::decode(&IDENTITY_FIXTURE).unwrap();
    assert_eq!(m, PoseMessage::new(0, 0, &RigidTransform::IDENTITY, 0));
    assert_eq!(m.encode(), IDENTITY_FIXTURE);
    assert_eq!(m.pose(), RigidTransform::IDENTITY);
}

#[test]
fn corrupted_magic_is_rejected() {
    let mut b = IDENTITY_FIXTURE;
    b[3] = b'X';
    assert_eq!(PoseMessage::decode(&b), Err(WireError::BadMagic(*b"IRTX")));
}

#[test]
fn trailing_bytes_are_ignored() {
    let mut b = IDENTITY_FIXTURE.to_vec();
    b.extend_from_slice(&IDENTITY_FIXTURE[..10]);
    assert!(PoseMessage::decode(&b).is_ok());
}

fn message() -> impl Strategy<Value = PoseMessage> {
    (
        any::<u32>(),
        any::<u64>(),
        0u8..4,
        prop::array::uniform3(-1e3..1e3f64),
        prop::array::uniform4(-1.0..1.0f64),
    )
        .prop_filter_map("zero quaternion", |(seq, t, flags, p, q)| {
            let q = UnitQuaternion::new_normalize(q[0], q[1], q[2], q[3])?;
            Some(PoseMessage::new(
                seq,
                t,
                &RigidTransform::new(q, Vec3::from(p)),
                flags,
            ))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn round_trip_is_lossless(m in message()) {
        let bytes = m.encode();
        let back = PoseMessage::decode(&bytes).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(back.encode(), bytes);
        prop_assert_eq!(back.predicted(), m.flags & FLAG_PREDICTED != 0);
        prop_assert_eq!(back.stale(), m.flags & FLAG_STALE != 0);
    }

    #[test]
    fn scaled_quaternions_are_rejected(m in message(), s in 1.001..2.0f64) {
        let mut bad = m;
        bad.rotation.iter_mut().for_each(|v| *v *= s);
        let is_non_unit = matches!(PoseMessage::decode(&bad.encode()), Err(WireError::NonUnitQuaternion(_)));
        prop_assert!(is_non_unit);
    }
}
