//! Tangent chains and the tangle curves they generate.
//!
//! Link `i` covers the parameter interval `[t_i, t_{i+1}]` with `t_i = iπ/2`
//! and has the closed form
//!
//! ```text
//! s_i(t) = V_i sin(t - t_i) - V_{i+1} cos(t - t_i) + T_i
//! ```
//!
//! where the translations obey `T_{i+1} = V_i + V_{i+2} + T_i`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TangleError};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Parameter length of a single link.
pub const LINK_SPAN: f64 = FRAC_PI_2;

/// Tolerance for construction-time checks on unit length and orthogonality.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Tolerance used to decide whether a parameter sits on a knot.
const KNOT_EPS: f64 = 1e-12;

/// Tangent of the canonical arc at its start, `(0, 1, 0)`.
pub fn canonical_v0() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

/// Tangent of the canonical arc at its end, `(-1, 0, 0)`.
pub fn canonical_v1() -> Vec3 {
    Vec3::new(-1.0, 0.0, 0.0)
}

/// The canonical quarter arc `c(t) = (cos t, sin t, 0)` on `[0, π/2]`.
pub fn canonical_arc(t: f64) -> Result<Vec3> {
    let (s, c) = sin_cos(check_range(t, 0.0, LINK_SPAN)?);
    Ok(Vec3::new(c, s, 0.0))
}

fn check_range(t: f64, lo: f64, hi: f64) -> Result<f64> {
    let slack = KNOT_EPS * hi.abs().max(1.0);
    if !t.is_finite() || t < lo - slack || t > hi + slack {
        return Err(TangleError::Domain { value: t, lo, hi });
    }
    Ok(t.clamp(lo, hi))
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can return values equal to 2π after rounding
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn is_unit(v: &Vec3, tol: f64) -> bool {
    (v.norm() - 1.0).abs() <= tol
}

fn is_orthonormal_pair(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    is_unit(a, tol) && is_unit(b, tol) && a.dot(b).abs() <= tol
}

/// Uniform knot partition `t_i = iπ/2`, `i = 0..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnotGrid {
    links: usize,
}

impl KnotGrid {
    pub fn new(links: usize) -> Self {
        Self { links }
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn knot(&self, i: usize) -> f64 {
        i as f64 * LINK_SPAN
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.links).map(|i| self.knot(i)).collect()
    }

    /// End of the parameter range, `nπ/2`.
    pub fn end(&self) -> f64 {
        self.knot(self.links)
    }

    /// Splits a global parameter into `(link index, local parameter)`.
    ///
    /// Interior knots resolve to the link on the right; the final knot
    /// resolves to the last link.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let t = check_range(t, 0.0, self.end())?;
        let i = ((t / LINK_SPAN).floor() as usize).min(self.links.saturating_sub(1));
        let local = (t - self.knot(i)).clamp(0.0, LINK_SPAN);
        Ok((i, local))
    }

    pub fn is_knot(&self, t: f64) -> bool {
        let nearest = (t / LINK_SPAN).round();
        (t - nearest * LINK_SPAN).abs() <= KNOT_EPS * t.abs().max(1.0)
    }
}

/// Unit tangents `V_0..V_n` at the knots of an `n`-link tangle.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentChain {
    vectors: Vec<Vec3>,
}

impl TangentChain {
    /// Builds a chain, checking unit length and consecutive orthogonality
    /// within [`DEFAULT_TOLERANCE`].
    pub fn new(vectors: Vec<Vec3>) -> Result<Self> {
        Self::with_tolerance(vectors, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(vectors: Vec<Vec3>, tol: f64) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(TangleError::DegenerateChain(format!(
                "a chain needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        for (i, v) in vectors.iter().enumerate() {
            if !is_unit(v, tol) {
                return Err(TangleError::DegenerateChain(format!(
                    "V_{i} has norm {}",
                    v.norm()
                )));
            }
        }
        for (i, pair) in vectors.windows(2).enumerate() {
            let d = pair[0].dot(&pair[1]);
            if d.abs() > tol {
                return Err(TangleError::DegenerateChain(format!(
                    "<V_{i}, V_{}> = {d}",
                    i + 1
                )));
            }
        }
        Ok(Self { vectors })
    }

    /// Wraps vectors without any check. Used for integrator output and for
    /// deliberately perturbed chains.
    pub fn from_vectors_unchecked(vectors: Vec<Vec3>) -> Self {
        Self { vectors }
    }

    /// Number of links `n`.
    pub fn links(&self) -> usize {
        self.vectors.len() - 1
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec3> {
        self.vectors
    }

    pub fn grid(&self) -> KnotGrid {
        KnotGrid::new(self.links())
    }

    /// Applies a rotation to every tangent.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self {
            vectors: self.vectors.iter().map(|v| rotation * v).collect(),
        }
    }

    /// Rotates the chain so that its first link is the canonical arc,
    /// `V_0 = (0,1,0)` and `V_1 = (-1,0,0)`.
    pub fn canonicalized(&self) -> Result<Self> {
        let r = rotation_from_tangents(&self.vectors[0], &self.vectors[1])?;
        let mut out = self.rotated(&r.transpose());
        // pin the seeds exactly
        out.vectors[0] = canonical_v0();
        out.vectors[1] = canonical_v1();
        Ok(out)
    }

    /// True if `V_0, V_1` equal the canonical seeds within `tol`.
    pub fn has_canonical_first_link(&self, tol: f64) -> bool {
        (self.vectors[0] - canonical_v0()).amax() <= tol
            && (self.vectors[1] - canonical_v1()).amax() <= tol
    }
}

impl std::ops::Index<usize> for TangentChain {
    type Output = Vec3;

    fn index(&self, i: usize) -> &Vec3 {
        &self.vectors[i]
    }
}

/// Translations `T_0..T_{n-1}` from `T_{i+1} = V_i + V_{i+2} + T_i`.
pub fn compute_translations(chain: &TangentChain, base: Vec3) -> Vec<Vec3> {
    let v = chain.vectors();
    let n = chain.links();
    let mut out = Vec::with_capacity(n);
    out.push(base);
    for i in 0..n.saturating_sub(1) {
        let next = v[i] + v[i + 2] + out[i];
        out.push(next);
    }
    out
}

/// Closed-form point on a single link at local parameter `t_local`.
pub fn link_eval(vi: &Vec3, vnext: &Vec3, ti: &Vec3, t_local: f64) -> Result<Vec3> {
    let (s, c) = sin_cos(check_range(t_local, 0.0, LINK_SPAN)?);
    Ok(vi * s - vnext * c + ti)
}

/// `(sin τ, cos τ)`, exact at both ends of a link.
fn sin_cos(tau: f64) -> (f64, f64) {
    if tau == LINK_SPAN {
        (1.0, 0.0)
    } else {
        tau.sin_cos()
    }
}

fn link_tangent(vi: &Vec3, vnext: &Vec3, tau: f64) -> Vec3 {
    let (s, c) = sin_cos(tau);
    vi * c + vnext * s
}

fn link_acceleration(vi: &Vec3, vnext: &Vec3, tau: f64) -> Vec3 {
    let (s, c) = sin_cos(tau);
    vnext * c - vi * s
}

/// Rotation taking the canonical arc onto the link with tangents
/// `(vi, vnext)`: columns `(-vnext, vi, vi × vnext)`.
pub fn rotation_from_tangents(vi: &Vec3, vnext: &Vec3) -> Result<Matrix3<f64>> {
    if !is_orthonormal_pair(vi, vnext, DEFAULT_TOLERANCE) {
        return Err(TangleError::DegenerateChain(
            "link tangents must be orthonormal".into(),
        ));
    }
    Ok(Matrix3::from_columns(&[-vnext, *vi, vi.cross(vnext)]))
}

/// A tangle: tangent chain plus per-link translations.
#[derive(Clone, Debug, PartialEq)]
pub struct TangleCurve {
    chain: TangentChain,
    translations: Vec<Vec3>,
}

impl TangleCurve {
    pub fn new(chain: TangentChain, base_translation: Vec3) -> Self {
        let translations = compute_translations(&chain, base_translation);
        Self {
            chain,
            translations,
        }
    }

    /// Assembles a curve from explicit translations, bypassing the recurrence.
    pub fn from_parts(chain: TangentChain, translations: Vec<Vec3>) -> Result<Self> {
        if translations.len() != chain.links() {
            return Err(TangleError::LengthMismatch {
                expected: chain.links(),
                actual: translations.len(),
            });
        }
        Ok(Self {
            chain,
            translations,
        })
    }

    pub fn chain(&self) -> &TangentChain {
        &self.chain
    }

    pub fn translations(&self) -> &[Vec3] {
        &self.translations
    }

    pub fn base_translation(&self) -> Vec3 {
        self.translations[0]
    }

    pub fn links(&self) -> usize {
        self.chain.links()
    }

    pub fn grid(&self) -> KnotGrid {
        self.chain.grid()
    }

    /// Point on link `i` at local parameter `tau`.
    pub fn link_point(&self, i: usize, tau: f64) -> Result<Vec3> {
        let v = self.chain.vectors();
        link_eval(&v[i], &v[i + 1], &self.translations[i], tau)
    }

    /// Tangent of link `i` at local parameter `tau`.
    pub fn link_tangent(&self, i: usize, tau: f64) -> Vec3 {
        let v = self.chain.vectors();
        link_tangent(&v[i], &v[i + 1], tau)
    }

    pub fn point(&self, t: f64) -> Result<Vec3> {
        let (i, tau) = self.grid().locate(t)?;
        self.link_point(i, tau)
    }

    pub fn tangent(&self, t: f64) -> Result<Vec3> {
        let (i, tau) = self.grid().locate(t)?;
        Ok(self.link_tangent(i, tau))
    }

    fn interior(&self, t: f64) -> Result<(usize, f64)> {
        let grid = self.grid();
        let (i, tau) = grid.locate(t)?;
        if grid.is_knot(t) {
            return Err(TangleError::KnotPoint(t));
        }
        Ok((i, tau))
    }

    /// Curvature magnitude from the analytic first and second derivatives.
    pub fn curvature(&self, t: f64) -> Result<f64> {
        let (i, tau) = self.interior(t)?;
        let v = self.chain.vectors();
        let d1 = link_tangent(&v[i], &v[i + 1], tau);
        let d2 = link_acceleration(&v[i], &v[i + 1], tau);
        Ok(d1.cross(&d2).norm() / d1.norm().powi(3))
    }

    /// Torsion from the analytic derivatives up to third order.
    pub fn torsion(&self, t: f64) -> Result<f64> {
        let (i, tau) = self.interior(t)?;
        let v = self.chain.vectors();
        let d1 = link_tangent(&v[i], &v[i + 1], tau);
        let d2 = link_acceleration(&v[i], &v[i + 1], tau);
        let d3 = -d1;
        let b = d1.cross(&d2);
        Ok(b.dot(&d3) / b.norm_squared())
    }

    /// Unit binormal on the link containing `t`, `V_i × V_{i+1}`.
    pub fn binormal(&self, t: f64) -> Result<Vec3> {
        let (i, tau) = self.interior(t)?;
        let v = self.chain.vectors();
        let d1 = link_tangent(&v[i], &v[i + 1], tau);
        let d2 = link_acceleration(&v[i], &v[i + 1], tau);
        Ok(d1.cross(&d2).normalize())
    }

    /// Uniform samples, `samples_per_link` per link including both link
    /// endpoints, with shared joints emitted once.
    pub fn sample_polyline(&self, samples_per_link: usize) -> Result<Vec<(f64, Vec3)>> {
        if samples_per_link < 2 {
            return Err(TangleError::InvalidInput(
                "samples_per_link must be at least 2".into(),
            ));
        }
        let step = LINK_SPAN / (samples_per_link - 1) as f64;
        let grid = self.grid();
        let mut out = Vec::with_capacity(self.links() * (samples_per_link - 1) + 1);
        out.push((0.0, self.link_point(0, 0.0)?));
        for i in 0..self.links() {
            for k in 1..samples_per_link {
                let tau = if k == samples_per_link - 1 {
                    LINK_SPAN
                } else {
                    k as f64 * step
                };
                out.push((grid.knot(i) + tau, self.link_point(i, tau)?));
            }
        }
        Ok(out)
    }

    /// Applies `x ↦ R x + d` to the whole curve.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        Self {
            chain: self.chain.rotated(rotation),
            translations: self
                .translations
                .iter()
                .map(|t| rotation * t + translation)
                .collect(),
        }
    }
}

/// Joint angles `θ_0..θ_{n-2}` of an open tangle, each in `(-π, π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeAngles(Vec<f64>);

impl ShapeAngles {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles.into_iter().map(normalize_angle).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Link count of the tangles these angles describe.
    pub fn links(&self) -> usize {
        self.0.len() + 1
    }
}

/// Rotates `v` about the unit `axis` by `angle` (right-handed).
pub fn rotate_about(axis: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle) * v
}

/// Builds `V_{i+2} = R(V_{i+1}, θ_i) V_i` from seeds `V_0, V_1`.
pub fn angles_to_chain(angles: &ShapeAngles, v0: Vec3, v1: Vec3) -> Result<TangentChain> {
    if !is_orthonormal_pair(&v0, &v1, DEFAULT_TOLERANCE) {
        return Err(TangleError::InvalidSeed);
    }
    let mut vectors = Vec::with_capacity(angles.len() + 2);
    vectors.push(v0);
    vectors.push(v1);
    for (i, &theta) in angles.as_slice().iter().enumerate() {
        let next = rotate_about(&vectors[i + 1], theta, &vectors[i]);
        vectors.push(next);
    }
    Ok(TangentChain::from_vectors_unchecked(vectors))
}

/// Signed rotation angles about `V_{i+1}` taking `V_i` to `V_{i+2}`.
pub fn chain_to_angles(chain: &TangentChain) -> Result<ShapeAngles> {
    if chain.links() < 2 {
        return Err(TangleError::DegenerateChain(
            "angles need at least 2 links".into(),
        ));
    }
    let v = chain.vectors();
    TangentChain::new(v.to_vec())?;
    let angles = (0..chain.links() - 1)
        .map(|i| {
            let s = v[i + 2].dot(&v[i + 1].cross(&v[i]));
            let c = v[i + 2].dot(&v[i]);
            s.atan2(c)
        })
        .collect();
    Ok(ShapeAngles::new(angles))
}
