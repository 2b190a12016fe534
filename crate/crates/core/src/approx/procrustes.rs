//! Rigid least-squares alignment of point sets.

use log::warn;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::chain::Vec3;
use crate::error::{Result, TangleError};

/// `x ↦ R x + d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| rotation[(i, j)])),
            translation: translation.into(),
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vec3::zeros())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn translation_vector(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation_matrix() * x + self.translation_vector()
    }
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Rotation `R` (`det R = +1`) and translation `d` minimizing
/// `Σ ‖R m_k + d - f_k‖²`.
///
/// If the cross-covariance has rank below two the rotation is not
/// determined; the identity is used and a warning is logged.
pub fn procrustes_align(moving: &[Vec3], fixed: &[Vec3]) -> Result<RigidTransform> {
    if moving.len() != fixed.len() {
        return Err(TangleError::LengthMismatch {
            expected: fixed.len(),
            actual: moving.len(),
        });
    }
    if moving.is_empty() {
        return Err(TangleError::InvalidInput("empty point sets".into()));
    }
    let (cm, cf) = (centroid(moving), centroid(fixed));
    let cov: Matrix3<f64> = moving
        .iter()
        .zip(fixed)
        .map(|(m, f)| (f - cf) * (m - cm).transpose())
        .sum();
    let svd = cov.svd(true, true);
    let s = svd.singular_values;
    if s[1] <= f64::EPSILON * s[0].max(f64::MIN_POSITIVE) * 16.0 {
        warn!("rank-deficient point sets; falling back to identity rotation");
        return Ok(RigidTransform::new(Matrix3::identity(), cf - cm));
    }
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut d = Matrix3::identity();
    d[(2, 2)] = (u * v_t).determinant().signum();
    let rotation = u * d * v_t;
    Ok(RigidTransform::new(rotation, cf - rotation * cm))
}

/// Root-mean-square distance between paired points.
pub fn rms_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (sum / a.len() as f64).sqrt()
}
