//! Rotation helpers: skew matrices, elementary rotations, SO(3) reprojection
//! and Z-Y-X Euler angles.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Closest allowed distance of the pitch angle to ±π/2 before the Z-Y-X
/// parameterization is considered singular.
pub const PITCH_SINGULARITY_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("Euler pitch {pitch:.6} rad is within {margin} rad of the Z-Y-X singularity")]
pub struct EulerSingularity {
    pub pitch: f64,
    pub margin: f64,
}

/// `skew(a) * b == a.cross(&b)`
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Nearest rotation matrix in the Frobenius sense (polar factor via SVD).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (mut u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    if (u * v_t).determinant() < 0.0 {
        // flip the direction paired with the smallest singular value
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(2);
        u.column_mut(idx).neg_mut();
    }
    u * v_t
}

/// ‖RᵀR − I‖_F
pub fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Z-Y-X Euler angles `(roll, pitch, yaw)` with `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn euler_zyx(r: &Matrix3<f64>) -> Vector3<f64> {
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    Vector3::new(roll, pitch, yaw)
}

pub fn from_euler_zyx(euler: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(euler.z) * rot_y(euler.y) * rot_x(euler.x)
}

pub fn check_pitch(euler: &Vector3<f64>) -> Result<(), EulerSingularity> {
    if std::f64::consts::FRAC_PI_2 - euler.y.abs() < PITCH_SINGULARITY_MARGIN {
        return Err(EulerSingularity {
            pitch: euler.y,
            margin: PITCH_SINGULARITY_MARGIN,
        });
    }
    Ok(())
}

/// Z-Y-X Euler angle rates from the body-frame angular velocity.
pub fn euler_rates(euler: &Vector3<f64>, omega_body: &Vector3<f64>) -> Result<Vector3<f64>, EulerSingularity> {
    check_pitch(euler)?;
    let (sr, cr) = euler.x.sin_cos();
    let (tp, cp) = (euler.y.tan(), euler.y.cos());
    let (p, q, r) = (omega_body.x, omega_body.y, omega_body.z);
    let qr = q * sr + r * cr;
    Ok(Vector3::new(p + qr * tp, q * cr - r * sr, qr / cp))
}
