//! Elements of SO(3) and the rotation operator on spherical signals.
//!
//! Euler angles are ZYZ and active: `R = R_z(α) R_y(β) R_z(γ)`. Rotating a
//! signal means `(Λ_R f)(p) = f(Rᵀ p)`.

mod spatial;
pub(crate) mod wigner;

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_arg, Result};

pub use spatial::rotate_spatial;
pub use wigner::{rotate_coeffs, wigner_d, WignerTables};

/// ZYZ Euler angles with `α, γ ∈ [0, 2π)` and `β ∈ [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// A proper rotation with its canonical ZYZ Euler angles cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    matrix: Matrix3<f64>,
    euler: EulerZyz,
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn matrix_to_euler(m: &Matrix3<f64>) -> EulerZyz {
    let cb = m[(2, 2)].clamp(-1.0, 1.0);
    let sb = (m[(0, 2)].powi(2) + m[(1, 2)].powi(2)).sqrt();
    let beta = sb.atan2(cb);
    let (alpha, gamma) = if sb > 1e-12 {
        (m[(1, 2)].atan2(m[(0, 2)]), m[(2, 1)].atan2(-m[(2, 0)]))
    } else if cb > 0.0 {
        // Only α + γ is defined; put it all in α.
        (m[(1, 0)].atan2(m[(0, 0)]), 0.0)
    } else {
        ((-m[(1, 0)]).atan2(-m[(0, 0)]), 0.0)
    };
    EulerZyz {
        alpha: wrap_angle(alpha),
        beta,
        gamma: wrap_angle(gamma),
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
            euler: EulerZyz {
                alpha: 0.0,
                beta: 0.0,
                gamma: 0.0,
            },
        }
    }

    /// `R_z(α) R_y(β) R_z(γ)`; the cached angles are re-derived from the
    /// matrix so they are always canonical.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        let matrix = rot_z(alpha) * rot_y(beta) * rot_z(gamma);
        let euler = if beta > 0.0 && beta < PI {
            EulerZyz {
                alpha: wrap_angle(alpha),
                beta,
                gamma: wrap_angle(gamma),
            }
        } else {
            matrix_to_euler(&matrix)
        };
        Self { matrix, euler }
    }

    /// Accepts a matrix that is orthogonal with determinant +1 within `1e-9`.
    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("rotation matrix has non-finite entries"));
        }
        let ortho = (matrix * matrix.transpose() - Matrix3::identity())
            .abs()
            .max();
        let det = matrix.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(invalid_arg(format!(
                "not a rotation: orthogonality defect {ortho:e}, det {det}"
            )));
        }
        Ok(Self {
            euler: matrix_to_euler(&matrix),
            matrix,
        })
    }

    /// Rotation by `angle` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let matrix = *r.matrix();
        Self {
            euler: matrix_to_euler(&matrix),
            matrix,
        }
    }

    /// Rotation of the unit quaternion `(w, x, y, z)`; normalizes the input.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let matrix = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Self {
            euler: matrix_to_euler(&matrix),
            matrix,
        }
    }

    /// Haar-uniform sample (Shoemake's uniform unit quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (s2, c2) = (TAU * u2).sin_cos();
        let (s3, c3) = (TAU * u3).sin_cos();
        Self::from_quaternion(b * c3, a * s2, a * c2, b * s3)
    }

    /// Uniformly random viewing direction without in-plane rotation,
    /// `R_z(α) R_y(β)` with `cos β` uniform.
    pub fn random_two_dof<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let alpha = TAU * rng.random::<f64>();
        let beta = (1.0 - 2.0 * rng.random::<f64>()).clamp(-1.0, 1.0).acos();
        Self::from_euler(alpha, beta, 0.0)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn euler(&self) -> EulerZyz {
        self.euler
    }

    pub fn transpose(&self) -> Self {
        let matrix = self.matrix.transpose();
        Self {
            euler: matrix_to_euler(&matrix),
            matrix,
        }
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix * v
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Matrix3::identity()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        trace_to_angle(self.matrix.trace()).unwrap_or(PI)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        let matrix = self.matrix * rhs.matrix;
        Rotation {
            euler: matrix_to_euler(&matrix),
            matrix,
        }
    }
}

/// Haar-uniform rotation from a seed.
pub fn random_rotation(seed: u64) -> Rotation {
    Rotation::random(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn euler_to_matrix(alpha: f64, beta: f64, gamma: f64) -> Rotation {
    Rotation::from_euler(alpha, beta, gamma)
}

fn trace_to_angle(trace: f64) -> Result<f64> {
    let c = (trace - 1.0) / 2.0;
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&c) {
        return Err(invalid_arg(format!(
            "rotation trace {trace} outside the valid range"
        )));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// `arccos((tr(R2ᵀ R1) − 1) / 2)`, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> Result<f64> {
    trace_to_angle((r2.matrix.transpose() * r1.matrix).trace())
}

/// Angle of `R2ᵀ R1 R_est`; zero when `R_est = R1ᵀ R2`.
pub fn relative_pose_error(r1_gt: &Rotation, r2_gt: &Rotation, r_est: &Rotation) -> Result<f64> {
    trace_to_angle((r2_gt.matrix.transpose() * r1_gt.matrix * r_est.matrix).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn orthonormal(r: &Rotation) -> bool {
        let m = r.matrix();
        (m * m.transpose() - Matrix3::identity()).abs().max() < 1e-12
            && (m.determinant() - 1.0).abs() < 1e-12
    }

    #[test]
    fn euler_identity_and_half_turn() {
        assert_eq!(
            *Rotation::from_euler(0.0, 0.0, 0.0).matrix(),
            Matrix3::identity()
        );
        let r = Rotation::from_euler(PI, 0.0, 0.0);
        let v = r.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert!((v - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let r = Rotation::random(&mut rng);
            assert!(orthonormal(&r));
            let e = r.euler();
            assert!((0.0..TAU).contains(&e.alpha) && (0.0..TAU).contains(&e.gamma));
            assert!((0.0..=PI).contains(&e.beta));
            let back = Rotation::from_euler(e.alpha, e.beta, e.gamma);
            assert!((back.matrix() - r.matrix()).abs().max() < 1e-9);
        }
        for (a, b, g) in [(0.3, 0.0, 0.2), (1.0, PI, 0.5), (5.0, -0.4, 7.0)] {
            let r = Rotation::from_euler(a, b, g);
            let e = r.euler();
            let back = Rotation::from_euler(e.alpha, e.beta, e.gamma);
            assert!((back.matrix() - r.matrix()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn composition_matches_matrix_product() {
        let a = Rotation::from_euler(0.4, 1.1, 2.0);
        let b = Rotation::from_euler(3.0, 0.2, 5.5);
        let ab = a * b;
        let expect = a.matrix() * b.matrix();
        assert!((ab.matrix() - expect).abs().max() < 1e-12);
        // z-rotations about the same axis add.
        let z = Rotation::from_euler(0.3, 0.0, 0.0) * Rotation::from_euler(0.5, 0.0, 0.0);
        assert!(
            (z.matrix() - Rotation::from_euler(0.8, 0.0, 0.0).matrix())
                .abs()
                .max()
                < 1e-12
        );
    }

    #[test]
    fn geodesic_examples() {
        let r = random_rotation(5);
        assert!(geodesic_distance(&r, &r).unwrap() < 1e-7);
        let d =
            geodesic_distance(&Rotation::identity(), &Rotation::from_euler(PI, 0.0, 0.0)).unwrap();
        assert!((d - PI).abs() < 1e-12);
        let d = geodesic_distance(
            &Rotation::from_euler(FRAC_PI_2, 0.0, 0.0),
            &Rotation::from_euler(PI / 6.0, 0.0, 0.0),
        )
        .unwrap();
        assert!((d - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn relative_pose_error_zero_for_exact_estimate() {
        let r1 = random_rotation(1);
        let r2 = random_rotation(2);
        let est = r1.transpose() * r2;
        assert!(relative_pose_error(&r1, &r2, &est).unwrap() < 1e-7);
        assert!(relative_pose_error(&r1, &r1, &Rotation::identity()).unwrap() < 1e-7);
    }

    #[test]
    fn random_is_reproducible() {
        assert_eq!(random_rotation(42), random_rotation(42));
        assert_ne!(random_rotation(42), random_rotation(43));
    }

    #[test]
    fn haar_mean_trace_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| Rotation::random(&mut rng).matrix().trace())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "mean trace {mean}");
    }

    #[test]
    fn from_matrix_validates() {
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
        assert!(Rotation::from_matrix(-Matrix3::<f64>::identity()).is_err());
        let r = random_rotation(9);
        assert_eq!(
            Rotation::from_matrix(*r.matrix()).unwrap().matrix(),
            r.matrix()
        );
    }

    #[test]
    fn trace_clamping_tolerance() {
        assert!(trace_to_angle(3.0 + 1e-12).is_ok());
        assert!(trace_to_angle(3.1).is_err());
        assert!(trace_to_angle(-1.0 - 1e-12).is_ok());
        assert!(trace_to_angle(-1.5).is_err());
    }
}
