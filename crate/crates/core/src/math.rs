//! Fixed-size algebra shared by the rod model: the hat/vee isomorphism,
//! rotation repair after additive integration, and the 6×6 solve used to
//! recover strain derivatives at every node.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat6 = Matrix6<f64>;
pub type Vec6 = Vector6<f64>;

/// Tolerance used when checking skew symmetry and orthonormality.
pub const SO3_TOL: f64 = 1e-9;

/// Largest 1-norm condition estimate accepted by [`solve6`].
pub const MAX_CONDITION: f64 = 1e12;

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
#[inline]
pub fn hat(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not skew within [`SO3_TOL`].
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asym = (m + m.transpose()).abs().max();
    if asym > SO3_TOL {
        return Err(Error::InvalidArgument(format!(
            "vee expects a skew-symmetric matrix, max |M + Mᵀ| = {asym:e}"
        )));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// A 3×3 matrix known to lie on SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = hat(&axis.normalize());
        Rotation(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
    }

    /// Wraps `m` after checking orthonormality and orientation.
    pub fn try_from_matrix(m: Mat3) -> Result<Self> {
        let err = orthonormality_error(&m);
        let det = m.determinant();
        if err > SO3_TOL || (det - 1.0).abs() > SO3_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a rotation: ‖RᵀR − I‖_F = {err:e}, det = {det}"
            )));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking; used where drift is measured on purpose.
    pub(crate) fn from_raw(m: Mat3) -> Self {
        Rotation(m)
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Mat3 {
        self.0
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

/// Frobenius norm of `RᵀR − I`.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

/// Projects `r` onto SO(3) by computing its orthogonal polar factor.
///
/// Uses the Newton iteration `X ← ½(X + X⁻ᵀ)`, which converges
/// quadratically to the nearest rotation in the Frobenius norm when
/// `det(r) > 0`.
pub fn reorthonormalize(r: &Mat3) -> Result<Rotation> {
    let det = r.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::DegenerateRotation { determinant: det });
    }
    let mut x = *r;
    for _ in 0..32 {
        let inv_t = x
            .try_inverse()
            .ok_or(Error::DegenerateRotation { determinant: det })?
            .transpose();
        let next = (x + inv_t) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(Rotation(x))
}

/// Solves `m x = rhs` by LU factorization with partial pivoting.
///
/// The 1-norm condition number is estimated from the explicit inverse;
/// systems above [`MAX_CONDITION`] are rejected.
pub fn solve6(m: &Mat6, rhs: &Vec6) -> Result<Vec6> {
    let lu = m.lu();
    let inv = lu.try_inverse().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
        node: None,
    })?;
    let condition = norm1(m) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularSystem {
            condition,
            node: None,
        });
    }
    lu.solve(rhs).ok_or(Error::SingularSystem {
        condition,
        node: None,
    })
}

/// Maximum absolute column sum.
pub fn norm1(m: &Mat6) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Builds a 6×6 matrix from four 3×3 blocks.
pub fn block6(a11: &Mat3, a12: &Mat3, a21: &Mat3, a22: &Mat3) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a11);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(a12);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(a21);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(a22);
    m
}

pub fn stack6(top: &Vec3, bottom: &Vec3) -> Vec6 {
    Vec6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

pub fn split6(x: &Vec6) -> (Vec3, Vec3) {
    (Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]))
}
