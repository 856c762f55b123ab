//! 3D vectors, rotations and rigid transforms.
//!
//! All lengths are meters and all angles radians. Rotations are stored as
//! unit quaternions canonicalized to `w >= 0`; matrices only appear where a
//! solver needs them.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating that a matrix is a proper rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(
        "matrix is not a rotation (det = {det:.3e}, orthogonality error = {orthogonality:.3e})"
    )]
    NotARotation { det: f64, orthogonality: f64 },
    #[error("quaternion norm {0} is not unit")]
    NonUnitQuaternion(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > f64::MIN_POSITIVE && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Outer product `self * other^T`.
    pub fn outer(self, other: Vec3) -> Mat3 {
        let a = self.to_array();
        let b = other.to_array();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3::from_rows(m)
    }

    /// A unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(self) -> Vec3 {
        let helper = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Vec3::X
        } else if self.y.abs() <= self.z.abs() {
            Vec3::Y
        } else {
            Vec3::Z
        };
        self.cross(helper).normalized().unwrap_or(Vec3::X)
    }

    /// Arithmetic mean of a point set; `None` when empty.
    pub fn mean<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Vec3> {
        let mut sum = Vec3::ZERO;
        let mut n = 0usize;
        for p in points {
            sum += *p;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::IDENTITY
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };

    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Mat3 { m }
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn from_diagonal(d: [f64; 3]) -> Self {
        Mat3::from_rows([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.m[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = *v;
            }
        }
        Mat3::from_rows(t)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = self.m;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3::from_rows(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `selfᵀ·self − I`.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.transpose() * *self;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.m[i][j] - expected).abs());
            }
        }
        worst
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        (self.determinant() - 1.0).abs() <= tol && self.orthogonality_error() <= tol
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self.m;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += o.m[i][j];
            }
        }
        Mat3::from_rows(out)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Mat3::from_rows(out)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

/// Rotation as a unit quaternion, canonicalized so that `w >= 0`.
///
/// When `w == 0` the first non-zero vector component is made positive so
/// that both representatives of a half-turn serialize identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        UnitQuaternion::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes `(w, x, y, z)`. Returns `None` for a zero
    /// or non-finite input.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > f64::MIN_POSITIVE) {
            return None;
        }
        Some(Self::canonical(w / n, x / n, y / n, z / n))
    }

    /// Accepts `(w, x, y, z)` only if its norm is within `tol` of one. Inputs
    /// already unit to rounding are kept bit for bit; others are renormalized.
    pub fn try_from_wxyz(w: f64, x: f64, y: f64, z: f64, tol: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > tol {
            return Err(GeometryError::NonUnitQuaternion(n));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self::canonical(w, x, y, z));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        if flip {
            UnitQuaternion {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            UnitQuaternion { w, x, y, z }
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let axis = axis.normalized().ok_or(GeometryError::ZeroAxis)?;
        let (s, c) = (angle * 0.5).sin_cos();
        Ok(Self::canonical(c, axis.x * s, axis.y * s, axis.z * s))
    }

    /// Exponential map: rotation of `|v|` radians about `v`.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // first-order expansion keeps tiny rotations exact to rounding
            return Self::new_normalize(1.0, v.x * 0.5, v.y * 0.5, v.z * 0.5).unwrap_or_default();
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = v / angle;
        Self::canonical(c, a.x * s, a.y * s, a.z * s)
    }

    /// Logarithm map; the returned vector has norm in `[0, π]`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-300 {
            return Vec3::ZERO;
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_wxyz(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector_part(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Raw 4D inner product of the stored representatives.
    pub fn dot(self, o: UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn inverse(self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(q×v) + 2 q×(q×v)
        let q = self.vector_part();
        let t = q.cross(v) * 2.0;
        v + t * self.w + q.cross(t)
    }

    pub fn to_rotation_matrix(self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::from_rows([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Shepperd's method: branch on the largest of `trace` and the diagonal.
    pub fn from_rotation_matrix(r: &Mat3) -> Result<Self, GeometryError> {
        let det = r.determinant();
        let orthogonality = r.orthogonality_error();
        if (det - 1.0).abs() > ROTATION_TOLERANCE || orthogonality > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation { det, orthogonality });
        }
        let m = &r.m;
        let trace = r.trace();
        let (w, x, y, z) = if trace >= m[0][0] && trace >= m[1][1] && trace >= m[2][2] {
            let s = 2.0 * (1.0 + trace).sqrt();
            (
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
            let s = 2.0 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
            (
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] >= m[2][2] {
            let s = 2.0 * (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt();
            (
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt();
            (
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        Self::new_normalize(w, x, y, z).ok_or(GeometryError::NotARotation { det, orthogonality })
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        2.0 * self.vector_part().norm().atan2(self.w.abs())
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, o: UnitQuaternion) -> UnitQuaternion {
        let w = self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z;
        let x = self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y;
        let y = self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x;
        let z = self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w;
        UnitQuaternion::new_normalize(w, x, y, z).unwrap_or_default()
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

/// Angle of the relative rotation between `a` and `b`, in `[0, π]`.
///
/// Equal to `2·acos(|⟨a, b⟩|)`, evaluated through `atan2` so that it stays
/// accurate for nearly identical rotations.
pub fn angular_distance(a: UnitQuaternion, b: UnitQuaternion) -> f64 {
    // vector part of a⁻¹·b, unnormalized; exactly zero when a == b
    let (av, bv) = (a.vector_part(), b.vector_part());
    let v = bv * a.w - av * b.w - av.cross(bv);
    2.0 * v.norm().atan2(a.dot(b).abs())
}

/// Rotation followed by translation: `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: UnitQuaternion::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::IDENTITY, translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion) -> Self {
        Self::new(rotation, Vec3::ZERO)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation.rotate(other.translation) + self.translation,
        )
    }

    pub fn invert(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -inv.rotate(self.translation))
    }

    /// `[px, py, pz, qw, qx, qy, qz]`, the layout used by every file format.
    pub fn to_array7(&self) -> [f64; 7] {
        let q = self.rotation.to_wxyz();
        let t = self.translation;
        [t.x, t.y, t.z, q[0], q[1], q[2], q[3]]
    }

    /// Inverse of [`RigidTransform::to_array7`]; the quaternion must be unit
    /// within `1e-6`.
    pub fn from_array7(a: [f64; 7]) -> Result<Self, GeometryError> {
        let q = UnitQuaternion::try_from_wxyz(a[3], a[4], a[5], a[6], 1e-6)?;
        Ok(Self::new(q, Vec3::new(a[0], a[1], a[2])))
    }

    /// Homogeneous 4×4 matrix.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_rotation_matrix();
        let t = self.translation.to_array();
        let mut h = [[0.0; 4]; 4];
        for i in 0..3 {
            h[i][..3].copy_from_slice(&r.m[i]);
            h[i][3] = t[i];
        }
        h[3][3] = 1.0;
        h
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array7().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 7]>::deserialize(d)?;
        RigidTransform::from_array7(a).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rot_z(angle: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(Vec3::Z, angle).unwrap()
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn apply_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::IDENTITY.apply(p), p);

        let t = RigidTransform::from_rotation(rot_z(FRAC_PI_2));
        assert!(close(t.apply(Vec3::X), Vec3::Y, 1e-15));

        let t = RigidTransform::new(rot_z(FRAC_PI_2), Vec3::Z);
        assert!(close(t.apply(Vec3::X), Vec3::new(0.0, 1.0, 1.0), 1e-15));
    }

    #[test]
    fn quaternion_matrix_examples() {
        let q = UnitQuaternion::from_rotation_matrix(&Mat3::IDENTITY).unwrap();
        assert_eq!(q.to_wxyz(), [1.0, 0.0, 0.0, 0.0]);

        let half_turn_x = Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        let q = UnitQuaternion::from_rotation_matrix(&half_turn_x).unwrap();
        assert_eq!(q.to_wxyz(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn reflections_and_shears_are_rejected() {
        let mirror = Mat3::from_diagonal([1.0, 1.0, -1.0]);
        assert!(matches!(
            UnitQuaternion::from_rotation_matrix(&mirror),
            Err(GeometryError::NotARotation { .. })
        ));
        let shear = Mat3::from_rows([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(UnitQuaternion::from_rotation_matrix(&shear).is_err());
    }

    #[test]
    fn canonical_form_has_non_negative_w() {
        let q = UnitQuaternion::new_normalize(-0.5, 0.5, -0.5, 0.5).unwrap();
        assert_eq!(q.to_wxyz(), [0.5, -0.5, 0.5, -0.5]);
        let q = UnitQuaternion::new_normalize(0.0, -1.0, 0.0, 0.0).unwrap();
        assert_eq!(q.to_wxyz(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn angular_distance_examples() {
        let a = UnitQuaternion::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 0.7).unwrap();
        assert_eq!(angular_distance(a, a), 0.0);
        for axis in [Vec3::X, Vec3::Y, Vec3::new(1.0, 1.0, -2.0)] {
            let b = a * UnitQuaternion::from_axis_angle(axis, FRAC_PI_2).unwrap();
            assert!((angular_distance(a, b) - FRAC_PI_2).abs() < 1e-12);
        }
        // −a is not constructible directly; the raw components of −a give the same rotation.
        let [w, x, y, z] = a.to_wxyz();
        let neg = UnitQuaternion::new_normalize(-w, -x, -y, -z).unwrap();
        assert_eq!(angular_distance(a, neg), 0.0);
        assert!((angular_distance(UnitQuaternion::IDENTITY, rot_z(PI)) - PI).abs() < 1e-12);
    }

    #[test]
    fn serde_uses_seven_numbers() {
        let t = RigidTransform::new(rot_z(0.3), Vec3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&t).unwrap();
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert!(close(back.translation, t.translation, 0.0));
        assert!(angular_distance(back.rotation, t.rotation) < 1e-15);
        assert!(serde_json::from_str::<RigidTransform>("[0,0,0,2,0,0,0]").is_err());
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter_map(
            "non-zero",
            |(w, x, y, z)| {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                (n > 0.1).then(|| UnitQuaternion::new_normalize(w, x, y, z).unwrap())
            },
        )
    }

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (arb_quat(), arb_vec(5.0)).prop_map(|(q, t)| RigidTransform::new(q, t))
    }

    fn mat4_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn mat4_close(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4], tol: f64) -> bool {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| (x - y).abs() <= tol)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn inverse_round_trip(t in arb_transform(), p in arb_vec(10.0)) {
            prop_assert!(close(t.invert().apply(t.apply(p)), p, 1e-9));
            let double = t.invert().invert();
            prop_assert!(close(double.translation, t.translation, 1e-12));
            prop_assert!(angular_distance(double.rotation, t.rotation) < 1e-12);
        }

        #[test]
        fn compose_matches_homogeneous_product(a in arb_transform(), b in arb_transform(), p in arb_vec(3.0)) {
            let c = a.compose(&b);
            prop_assert!(close(c.apply(p), a.apply(b.apply(p)), 1e-9));
            let oracle = mat4_mul(&a.to_homogeneous(), &b.to_homogeneous());
            prop_assert!(mat4_close(&c.to_homogeneous(), &oracle, 1e-9));

            let id = a.compose(&a.invert());
            prop_assert!(id.translation.norm() < 1e-9);
            prop_assert!(id.rotation.angle() < 1e-9);
            let left = RigidTransform::IDENTITY.compose(&b);
            prop_assert!(close(left.translation, b.translation, 1e-15));
        }

        #[test]
        fn invert_matches_homogeneous_inverse(t in arb_transform()) {
            let prod = mat4_mul(&t.invert().to_homogeneous(), &t.to_homogeneous());
            let mut eye = [[0.0; 4]; 4];
            for (i, row) in eye.iter_mut().enumerate() { row[i] = 1.0; }
            prop_assert!(mat4_close(&prod, &eye, 1e-9));
            // rotation = Rᵀ, translation = −Rᵀt
            let rt = t.rotation.to_rotation_matrix().transpose();
            let inv = t.invert();
            prop_assert!((inv.rotation.to_rotation_matrix() - rt).frobenius_norm() < 1e-12);
            prop_assert!(close(inv.translation, -(rt * t.translation), 1e-12));
        }

        #[test]
        fn matrix_round_trip(q in arb_quat()) {
            let r = q.to_rotation_matrix();
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            let back = UnitQuaternion::from_rotation_matrix(&r).unwrap();
            prop_assert!((back.to_rotation_matrix() - r).frobenius_norm() < 1e-9);
            prop_assert!(back.w() >= 0.0);
        }

        #[test]
        fn angular_distance_is_a_metric(a in arb_quat(), b in arb_quat(), c in arb_quat()) {
            let ab = angular_distance(a, b);
            prop_assert!((ab - angular_distance(b, a)).abs() < 1e-12);
            prop_assert!((0.0..=PI + 1e-12).contains(&ab));
            prop_assert!(ab <= angular_distance(a, c) + angular_distance(c, b) + 1e-12);
        }

        #[test]
        fn rotation_vector_round_trip(v in arb_vec(3.0)) {
            prop_assume!(v.norm() < PI - 1e-3);
            let q = UnitQuaternion::from_rotation_vector(v);
            prop_assert!(close(q.to_rotation_vector(), v, 1e-9));
        }
    }
}
