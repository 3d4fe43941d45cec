//! Rotation group calculus: hat map, Rodrigues exponential, the analytic
//! derivative of the exponential, and a few distance/projection helpers.
//!
//! Matrices are vectorized column by column throughout the crate
//! (`vec(R) = [R[:,0]; R[:,1]; R[:,2]]`), which coincides with nalgebra's
//! column-major storage.

use nalgebra::{Matrix3, SMatrix, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle the Rodrigues coefficients are evaluated by series.
pub const SMALL_ANGLE: f64 = 1e-6;

/// The derivative coefficients lose precision much earlier than the
/// coefficients themselves, so they switch to series at a larger angle.
const SMALL_ANGLE_DERIVATIVE: f64 = 1e-2;

/// Axis-angle element of so(3); its norm is the rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector(pub Vector3<f64>);

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(pub Matrix3<f64>);

/// Derivative of the exponential map; row `k` is `vec(dR/dv_k)`.
pub type ExpJacobian = SMatrix<f64, 3, 9>;

impl TangentVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn exp(&self) -> RotationMatrix {
        exp_map(self)
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Builds from 9 column-major entries (the `vec` layout).
    pub fn from_column_slice(values: &[f64]) -> Self {
        Self(Matrix3::from_column_slice(values))
    }

    /// The column-major `vec` of the matrix.
    pub fn to_vec9(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out.copy_from_slice(self.0.as_slice());
        out
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Deviation from orthogonality, `‖RᵀR − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        self.orthogonality_error() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Matrix logarithm as an axis-angle vector with angle in `[0, π]`.
    pub fn log(&self) -> TangentVector {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.0);
        TangentVector(UnitQuaternion::from_rotation_matrix(&rot).scaled_axis())
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

/// Skew-symmetric matrix of `v`, so that `hat(v) * x = v × x`.
pub fn hat(v: &TangentVector) -> Matrix3<f64> {
    let [x, y, z] = [v.0.x, v.0.y, v.0.z];
    Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0)
}

/// `sinθ/θ` and `(1−cosθ)/θ²`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (1.0 - t2 / 6.0 + t4 / 120.0, 0.5 - t2 / 24.0 + t4 / 720.0)
    } else {
        let half = 0.5 * theta;
        let s = half.sin() / half;
        (theta.sin() / theta, 0.5 * s * s)
    }
}

/// `(dA/dθ)/θ` and `(dB/dθ)/θ` for the two coefficients above.
fn rodrigues_derivative_coefficients(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    if theta < SMALL_ANGLE_DERIVATIVE {
        let t4 = t2 * t2;
        (
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let half = (0.5 * theta).sin();
        let one_minus_cos = 2.0 * half * half;
        (
            (theta * c - s) / (t2 * theta),
            (theta * s - 2.0 * one_minus_cos) / (t2 * t2),
        )
    }
}

/// Rodrigues' formula `I + (sinθ/θ) K + ((1−cosθ)/θ²) K²` with `K = hat(v)`.
pub fn exp_map(v: &TangentVector) -> RotationMatrix {
    let k = hat(v);
    let (a, b) = rodrigues_coefficients(v.angle());
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Analytic derivative of [`exp_map`] with respect to each tangent component.
pub fn exp_jacobian(v: &TangentVector) -> ExpJacobian {
    let theta = v.angle();
    let k = hat(v);
    let k2 = k * k;
    let (a, b) = rodrigues_coefficients(theta);
    let (da, db) = rodrigues_derivative_coefficients(theta);

    let mut jac = ExpJacobian::zeros();
    for axis in 0..3 {
        let mut unit = Vector3::zeros();
        unit[axis] = 1.0;
        let e = hat(&TangentVector(unit));
        let vk = v.0[axis];
        let d = k * (da * vk) + e * a + k2 * (db * vk) + (e * k + k * e) * b;
        for (col, value) in d.as_slice().iter().enumerate() {
            jac[(axis, col)] = *value;
        }
    }
    jac
}

/// Geodesic distance `arccos((tr(aᵀb) − 1)/2)` in `[0, π]`.
pub fn geodesic_angle(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let cos = ((a.0.transpose() * b.0).trace() - 1.0) / 2.0;
    cos.clamp(-1.0, 1.0).acos()
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor with the
/// determinant fixed to +1).
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<RotationMatrix> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::Degenerate("non-finite matrix entries".into()));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not converge".into())),
    };
    let sigma = svd.singular_values;
    let largest = sigma.max();
    let smallest = sigma.min();
    if largest <= 0.0 || smallest <= largest * 1e-12 {
        return Err(Error::Degenerate(format!(
            "rank-deficient matrix (singular values {:.3e}..{:.3e})",
            smallest, largest
        )));
    }
    let mut correction = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // flip the direction with the smallest singular value
        let (idx, _) = sigma.argmin();
        correction[(idx, idx)] = -1.0;
    }
    Ok(RotationMatrix(u * correction * v_t))
}
