//! Open-tangle shape space as the flat torus of joint angles.
//!
//! Points are stored as angles in `(-π, π]`; the complex form
//! `p_k = exp(i θ_k)` is only used conceptually, so moduli never drift.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::{normalize_angle, ShapeAngles};
use crate::error::{Result, TangleError};

/// Reject a Log when `|q_k/p_k + 1|` falls below this.
pub const CUT_LOCUS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint {
    angles: Vec<f64>,
}

impl TorusPoint {
    pub fn from_angles(angles: Vec<f64>) -> Self {
        Self {
            angles: angles.into_iter().map(normalize_angle).collect(),
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dim(&self) -> usize {
        self.angles.len()
    }

    /// Unit complex coordinates `(cos θ_k, sin θ_k)`.
    pub fn complex(&self) -> Vec<(f64, f64)> {
        self.angles.iter().map(|a| (a.cos(), a.sin())).collect()
    }
}

impl From<ShapeAngles> for TorusPoint {
    fn from(a: ShapeAngles) -> Self {
        Self::from_angles(a.as_slice().to_vec())
    }
}

impl From<TorusPoint> for ShapeAngles {
    fn from(p: TorusPoint) -> Self {
        ShapeAngles::new(p.angles)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusTangent {
    pub theta: Vec<f64>,
}

impl TorusTangent {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: vec![0.0; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            theta: self.theta.iter().map(|x| x * s).collect(),
        }
    }

    /// Gaussian direction from a ChaCha8 stream, rescaled to length `norm`.
    pub fn seeded(dim: usize, seed: u64, norm: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len == 0.0 {
            return Self::zeros(dim);
        }
        Self::new(g).scaled(norm / len)
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(TangleError::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `Exp_p(θ) = (p_k e^{iθ_k})_k`.
pub fn exp_torus(p: &TorusPoint, theta: &TorusTangent) -> Result<TorusPoint> {
    check_dims(p.dim(), theta.theta.len())?;
    Ok(TorusPoint::from_angles(
        p.angles
            .iter()
            .zip(&theta.theta)
            .map(|(a, t)| a + t)
            .collect(),
    ))
}

/// `Log_p(q) = (arg(q_k / p_k))_k`, failing on antipodal coordinates.
pub fn log_torus(p: &TorusPoint, q: &TorusPoint) -> Result<TorusTangent> {
    check_dims(p.dim(), q.dim())?;
    let mut theta = Vec::with_capacity(p.dim());
    for (index, (a, b)) in p.angles.iter().zip(&q.angles).enumerate() {
        let d = b - a;
        // |e^{id} + 1|
        let (s, c) = d.sin_cos();
        if ((c + 1.0).powi(2) + s * s).sqrt() < CUT_LOCUS_TOLERANCE {
            return Err(TangleError::CutLocus { index });
        }
        theta.push(s.atan2(c).clamp(-PI, PI));
    }
    Ok(TorusTangent::new(theta))
}

/// `num_samples` points of `t ↦ Exp_p(tθ)` at uniform `t ∈ [0, 1]`.
pub fn geodesic_path_torus(
    p: &TorusPoint,
    theta: &TorusTangent,
    num_samples: usize,
) -> Result<Vec<TorusPoint>> {
    check_dims(p.dim(), theta.theta.len())?;
    if num_samples < 2 {
        return Err(TangleError::InvalidInput(
            "a geodesic needs at least 2 samples".into(),
        ));
    }
    (0..num_samples)
        .map(|k| {
            let t = k as f64 / (num_samples - 1) as f64;
            exp_torus(p, &theta.scaled(t))
        })
        .collect()
}
