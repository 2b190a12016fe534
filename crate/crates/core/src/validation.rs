//! Residual reports for tangent chains and tangle curves.

use serde::{Deserialize, Serialize};

use crate::chain::{TangentChain, TangleCurve, Vec3, LINK_SPAN};

/// Worst-case deviations of a chain from the tangle model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `max |‖V_i‖ - 1|`.
    pub max_norm_deviation: f64,
    /// `max |90° - ∠(V_i, V_{i+1})|` in degrees.
    pub max_orthogonality_deviation_degrees: f64,
    /// Largest point mismatch between adjacent links at interior knots.
    pub c0_residual: f64,
    /// Largest tangent mismatch between adjacent links at interior knots.
    pub c1_residual: f64,
    /// For closed chains: `max(‖Σ V_i‖, |⟨V_0, V_{n-1}⟩|, ‖V_n - V_0‖)`.
    pub closure_residual: f64,
}

impl ValidationReport {
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            max_norm_deviation: self.max_norm_deviation.max(other.max_norm_deviation),
            max_orthogonality_deviation_degrees: self
                .max_orthogonality_deviation_degrees
                .max(other.max_orthogonality_deviation_degrees),
            c0_residual: self.c0_residual.max(other.c0_residual),
            c1_residual: self.c1_residual.max(other.c1_residual),
            closure_residual: self.closure_residual.max(other.closure_residual),
        }
    }

    /// True when norms and right angles are within the given envelope.
    pub fn within(&self, max_angle_degrees: f64, max_norm: f64) -> bool {
        self.max_orthogonality_deviation_degrees < max_angle_degrees
            && self.max_norm_deviation < max_norm
    }
}

/// Angle between two vectors in degrees, robust near 90°.
pub fn angle_degrees(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

fn chain_residuals(chain: &TangentChain, closed: bool) -> ValidationReport {
    let v = chain.vectors();
    let n = chain.links();
    let max_norm_deviation = v.iter().map(|x| (x.norm() - 1.0).abs()).fold(0.0, f64::max);
    let max_orthogonality_deviation_degrees = v
        .windows(2)
        .map(|p| (90.0 - angle_degrees(&p[0], &p[1])).abs())
        .fold(0.0, f64::max);
    let closure_residual = if closed {
        let sum: Vec3 = v[..n].iter().sum();
        sum.norm()
            .max(v[0].dot(&v[n - 1]).abs())
            .max((v[n] - v[0]).norm())
    } else {
        0.0
    };
    ValidationReport {
        max_norm_deviation,
        max_orthogonality_deviation_degrees,
        c0_residual: 0.0,
        c1_residual: 0.0,
        closure_residual,
    }
}

fn knot_residuals(curve: &TangleCurve) -> (f64, f64) {
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for i in 1..curve.links() {
        let left = curve.link_point(i - 1, LINK_SPAN).expect("in range");
        let right = curve.link_point(i, 0.0).expect("in range");
        c0 = c0.max((left - right).norm());
        let dl = curve.link_tangent(i - 1, LINK_SPAN);
        let dr = curve.link_tangent(i, 0.0);
        c1 = c1.max((dl - dr).norm());
    }
    (c0, c1)
}

/// Validates a chain against the open (`closed = false`) or closed model.
///
/// Knot continuity is measured on the curve generated from the chain with
/// zero base translation.
pub fn validate_chain(chain: &TangentChain, closed: bool) -> ValidationReport {
    let curve = TangleCurve::new(chain.clone(), Vec3::zeros());
    validate_curve(&curve, closed)
}

/// As [`validate_chain`], but measures continuity on the curve's own
/// translations.
pub fn validate_curve(curve: &TangleCurve, closed: bool) -> ValidationReport {
    let mut report = chain_residuals(curve.chain(), closed);
    let (c0, c1) = knot_residuals(curve);
    report.c0_residual = c0;
    report.c1_residual = c1;
    report
}

/// Coefficients of `s_i(t) = a + b cos(t - t_i) + c sin(t - t_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineMembership {
    pub member: bool,
    pub c0_residual: f64,
    pub c1_residual: f64,
    /// Largest mismatch between extracted coefficients and `(T_i, -V_{i+1}, V_i)`.
    pub coefficient_residual: f64,
    pub coefficients: Vec<LinkCoefficients>,
}

/// Extracts the three coefficient vectors of link `i` from point samples.
///
/// With `τ = t - t_i`: `s(0) = a + b`, `s(π/2) = a + c`, `s'(0) = c`.
fn extract_coefficients(curve: &TangleCurve, i: usize) -> (Vec3, Vec3, Vec3) {
    let start = curve.link_point(i, 0.0).expect("in range");
    let end = curve.link_point(i, LINK_SPAN).expect("in range");
    let c = curve.link_tangent(i, 0.0);
    let a = end - c;
    let b = start - a;
    (a, b, c)
}

/// Checks that a curve is a trigonometric spline of order 3 with unit
/// multiplicities on the knot grid, and that its per-link coefficients
/// agree with the tangle closed form.
pub fn trig_spline_membership(curve: &TangleCurve, tol: f64) -> SplineMembership {
    let (c0, c1) = knot_residuals(curve);
    let v = curve.chain().vectors();
    let mut coefficients = Vec::with_capacity(curve.links());
    let mut coefficient_residual: f64 = 0.0;
    for i in 0..curve.links() {
        let (a, b, c) = extract_coefficients(curve, i);
        coefficient_residual = coefficient_residual
            .max((a - curve.translations()[i]).norm())
            .max((b + v[i + 1]).norm())
            .max((c - v[i]).norm());
        coefficients.push(LinkCoefficients {
            a: a.into(),
            b: b.into(),
            c: c.into(),
        });
    }
    SplineMembership {
        member: c0 <= tol && c1 <= tol && coefficient_residual <= tol,
        c0_residual: c0,
        c1_residual: c1,
        coefficient_residual,
        coefficients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::chain::rotate_about;
    use approx::assert_abs_diff_eq;

    #[test]
    fn circle_is_exact() {
        let r = validate_chain(&catalog::circle4(), true);
        assert_eq!(r, ValidationReport::default());
        let r = validate_chain(&catalog::doubled_circle8(), true);
        assert_eq!(r, ValidationReport::default());
    }

    #[test]
    fn scaled_vector_reports_norm_deviation() {
        let mut v = catalog::circle4().into_vectors();
        v[2] *= 1.02;
        let r = validate_chain(&TangentChain::from_vectors_unchecked(v), false);
        assert_abs_diff_eq!(r.max_norm_deviation, 0.02, epsilon = 1e-15);
        assert!(r.max_orthogonality_deviation_degrees < 1e-12);
    }

    #[test]
    fn rotated_vector_reports_angle_deviation() {
        let mut v = catalog::circle4().into_vectors();
        // tilt V_2 by 1° towards V_1, within the plane of V_1 and V_2
        let axis = v[1].cross(&v[2]);
        v[2] = rotate_about(&axis, -1f64.to_radians(), &v[2]);
        assert_abs_diff_eq!(angle_degrees(&v[1], &v[2]), 89.0, epsilon = 1e-12);
        let r = validate_chain(&TangentChain::from_vectors_unchecked(v), false);
        assert_abs_diff_eq!(r.max_orthogonality_deviation_degrees, 1.0, epsilon = 1e-12);
        assert!(r.max_norm_deviation < 1e-15);
    }

    #[test]
    fn closure_residual_for_open_circle_segment() {
        let v = catalog::circle4().into_vectors();
        let open = TangentChain::new(v[..4].to_vec()).unwrap();
        // three quarters of a circle: ‖ΣV_i‖ = 1, |⟨V_0, V_2⟩| = 1, ‖V_3 - V_0‖ = √2
        let r = validate_chain(&open, true);
        assert_abs_diff_eq!(r.closure_residual, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn tangles_are_trig_splines() {
        let curve = TangleCurve::new(catalog::six_link_b(), Vec3::new(1.0, 2.0, -0.5));
        let m = trig_spline_membership(&curve, 1e-12);
        assert!(m.member, "{m:?}");
        assert!(m.c0_residual < 1e-12 && m.c1_residual < 1e-12);
    }

    #[test]
    fn perturbed_translation_breaks_continuity() {
        let curve = TangleCurve::new(catalog::circle4(), Vec3::zeros());
        let mut t = curve.translations().to_vec();
        t[1] += Vec3::new(0.1, 0.0, 0.0);
        let bad = TangleCurve::from_parts(curve.chain().clone(), t).unwrap();
        let m = trig_spline_membership(&bad, 1e-12);
        assert!(!m.member);
        assert_abs_diff_eq!(m.c0_residual, 0.1, epsilon = 1e-15);
        assert!(m.c1_residual < 1e-15);
    }

    #[test]
    fn circle_link_coefficients() {
        let curve = TangleCurve::new(catalog::circle4(), Vec3::zeros());
        let m = trig_spline_membership(&curve, 1e-12);
        let c = m.coefficients[0];
        let close = |x: [f64; 3], y: [f64; 3]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-15);
        assert!(close(c.a, [0.0, 0.0, 0.0]));
        assert!(close(c.b, [1.0, 0.0, 0.0]));
        assert!(close(c.c, [0.0, 1.0, 0.0]));
    }
}
