//! Singular value decomposition of 3×3 matrices by one-sided Jacobi rotations.

use crate::geometry::{Mat3, Vec3};

/// `A = U · diag(σ) · Vᵀ` with `σ₀ ≥ σ₁ ≥ σ₂ ≥ 0`.
///
/// `U` and `V` are orthogonal but their determinants may be −1.
#[derive(Debug, Clone, Copy)]
pub struct Svd3 {
    pub u: Mat3,
    pub singular_values: [f64; 3],
    pub v: Mat3,
}

const MAX_SWEEPS: usize = 64;

/// Relative size below which a singular value is treated as zero when
/// completing the left basis.
const RANK_EPS: f64 = 1e-13;

pub fn svd3(a: &Mat3) -> Svd3 {
    let mut cols = [a.column(0), a.column(1), a.column(2)];
    let mut v = [Vec3::X, Vec3::Y, Vec3::Z];

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = cols[p].norm_squared();
            let beta = cols[q].norm_squared();
            let gamma = cols[p].dot(cols[q]);
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            let (ap, aq) = (cols[p], cols[q]);
            cols[p] = ap * c - aq * s;
            cols[q] = ap * s + aq * c;
            let (vp, vq) = (v[p], v[q]);
            v[p] = vp * c - vq * s;
            v[q] = vp * s + vq * c;
        }
        if !rotated {
            break;
        }
    }

    let mut order = [0usize, 1, 2];
    let norms = cols.map(|c| c.norm());
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma = order.map(|i| norms[i]);
    let a_sorted = order.map(|i| cols[i]);
    let v_sorted = order.map(|i| v[i]);

    // Left singular vectors: Gram-Schmidt on A·V columns, completing the basis
    // for vanishing singular values.
    let scale = sigma[0].max(f64::MIN_POSITIVE);
    let u0 = if sigma[0] > 0.0 {
        a_sorted[0] / sigma[0]
    } else {
        Vec3::X
    };
    let u1 = if sigma[1] > RANK_EPS * scale {
        let w = a_sorted[1] - u0 * u0.dot(a_sorted[1]);
        w.normalized().unwrap_or_else(|| u0.any_orthogonal())
    } else {
        u0.any_orthogonal()
    };
    let mut u2 = u0.cross(u1);
    if a_sorted[2].dot(u2) < 0.0 {
        u2 = -u2;
    }

    Svd3 {
        u: Mat3::from_columns(u0, u1, u2),
        singular_values: sigma,
        v: Mat3::from_columns(v_sorted[0], v_sorted[1], v_sorted[2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(s: &Svd3) -> Mat3 {
        s.u * Mat3::from_diagonal(s.singular_values) * s.v.transpose()
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        m.iter_mut()
            .flatten()
            .for_each(|v| *v = rng.random_range(-1.0..1.0));
        Mat3::from_rows(m)
    }

    #[test]
    fn reconstructs_random_matrices_and_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let a = random_matrix(&mut rng);
            let s = svd3(&a);
            assert!((reconstruct(&s) - a).frobenius_norm() < 1e-12);
            assert!(s.u.orthogonality_error() < 1e-12);
            assert!(s.v.orthogonality_error() < 1e-12);

            let na = nalgebra::Matrix3::from_row_slice(&a.m.concat());
            let mut expected: Vec<f64> = na.singular_values().iter().copied().collect();
            expected.sort_by(|x, y| y.total_cmp(x));
            for (got, want) in s.singular_values.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-10, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn rank_deficient_inputs_keep_orthonormal_factors() {
        let a = Vec3::new(1.0, 2.0, -0.5);
        let b = Vec3::new(0.3, -1.0, 0.25);
        let rank_one = a.outer(b);
        let s = svd3(&rank_one);
        assert!(s.singular_values[1] < 1e-12 && s.singular_values[2] < 1e-12);
        assert!(s.u.orthogonality_error() < 1e-12);
        assert!((reconstruct(&s) - rank_one).frobenius_norm() < 1e-12);

        let rank_two = a.outer(b) + Vec3::new(0.0, 1.0, 1.0).outer(Vec3::X);
        let s = svd3(&rank_two);
        assert!(s.singular_values[2] < 1e-12);
        assert!(s.u.orthogonality_error() < 1e-12);
        assert!((reconstruct(&s) - rank_two).frobenius_norm() < 1e-12);

        let s = svd3(&Mat3::ZERO);
        assert_eq!(s.singular_values, [0.0; 3]);
        assert!(s.u.orthogonality_error() < 1e-15);
    }
}
