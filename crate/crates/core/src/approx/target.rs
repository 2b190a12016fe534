//! Target curves sampled on the tangle parameter grid.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::chain::{TangleCurve, Vec3};
use crate::error::{Result, TangleError};

pub const DEFAULT_SAMPLES_PER_LINK: usize = 20;
/// Maximum endpoint gap, relative to curve length, for a closed input.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

/// Points and tangents of a curve at `t_j = j·π/(2m)`, `j = 0..=n·m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetCurve {
    links: usize,
    samples_per_link: usize,
    closed: bool,
    points: Vec<Vec3>,
    tangents: Vec<Vec3>,
}

impl TargetCurve {
    pub fn new(
        links: usize,
        samples_per_link: usize,
        closed: bool,
        points: Vec<Vec3>,
        tangents: Vec<Vec3>,
    ) -> Result<Self> {
        check_grid(links, samples_per_link)?;
        let expected = links * samples_per_link + 1;
        for len in [points.len(), tangents.len()] {
            if len != expected {
                return Err(TangleError::LengthMismatch {
                    expected,
                    actual: len,
                });
            }
        }
        Ok(Self {
            links,
            samples_per_link,
            closed,
            points,
            tangents,
        })
    }

    /// Samples a tangle curve exactly.
    pub fn from_tangle(curve: &TangleCurve, samples_per_link: usize, closed: bool) -> Result<Self> {
        let links = curve.links();
        check_grid(links, samples_per_link)?;
        let h = FRAC_PI_2 / samples_per_link as f64;
        let count = links * samples_per_link + 1;
        let mut points = Vec::with_capacity(count);
        let mut tangents = Vec::with_capacity(count);
        for j in 0..count {
            let (i, k) = (j / samples_per_link, j % samples_per_link);
            // the final sample is the end of the last link
            let (i, tau) = if i == links {
                (links - 1, FRAC_PI_2)
            } else {
                (i, k as f64 * h)
            };
            points.push(curve.link_point(i, tau)?);
            tangents.push(curve.link_tangent(i, tau));
        }
        Self::new(links, samples_per_link, closed, points, tangents)
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn samples_per_link(&self) -> usize {
        self.samples_per_link
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Grid spacing `π/(2m)`.
    pub fn spacing(&self) -> f64 {
        FRAC_PI_2 / self.samples_per_link as f64
    }

    pub fn params(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points.len()).map(|j| j as f64 * h).collect()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn tangents(&self) -> &[Vec3] {
        &self.tangents
    }

    /// Polyline length of the sampled points.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

fn check_grid(links: usize, samples_per_link: usize) -> Result<()> {
    if links == 0 || samples_per_link == 0 {
        return Err(TangleError::InvalidInput(
            "link count and samples per link must be positive".into(),
        ));
    }
    Ok(())
}

/// Points at equal arc-length spacing along a polyline, first and last
/// included.
fn resample_arc_length(points: &[Vec3], count: usize) -> Result<(Vec<Vec3>, f64)> {
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for w in points.windows(2) {
        let last = *cumulative.last().expect("non-empty");
        cumulative.push(last + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().expect("non-empty");
    if total.is_nan() || total <= 0.0 || total.is_infinite() {
        return Err(TangleError::DegenerateCurve(format!(
            "polyline length {total} is not positive"
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for j in 0..count {
        let s = total * j as f64 / (count - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > 0.0 {
            ((s - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * u);
    }
    *out.last_mut().expect("count >= 2") = *points.last().expect("non-empty");
    Ok((out, total))
}

fn validate_points(points: &[Vec3]) -> Result<()> {
    if points.len() < 4 {
        return Err(TangleError::InvalidInput(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(TangleError::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

/// True if the last point coincides with the first relative to the
/// polyline length.
pub fn is_closed_polyline(points: &[Vec3]) -> bool {
    let length: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    match (points.first(), points.last()) {
        (Some(a), Some(b)) => (b - a).norm() <= CLOSURE_TOLERANCE * length.max(1.0),
        _ => false,
    }
}

/// Resamples an ordered point list by arc length onto the grid of an
/// `n`-link tangle and estimates tangents by central differences.
///
/// Interior tangents use central differences; the two ends use one-sided
/// second-order stencils. All tangents are rescaled to the constant speed
/// `L/(nπ/2)`.
pub fn ingest_curve(points: &[Vec3], links: usize, samples_per_link: usize) -> Result<TargetCurve> {
    validate_points(points)?;
    check_grid(links, samples_per_link)?;
    let count = links * samples_per_link + 1;
    let (pts, length) = resample_arc_length(points, count)?;
    let h = FRAC_PI_2 / samples_per_link as f64;
    let speed = length / (links as f64 * FRAC_PI_2);
    let last = count - 1;
    let tangents = (0..count)
        .map(|j| {
            let d = if j == 0 {
                (pts[1] * 4.0 - pts[0] * 3.0 - pts[2]) / (2.0 * h)
            } else if j == last {
                (pts[last] * 3.0 - pts[last - 1] * 4.0 + pts[last - 2]) / (2.0 * h)
            } else {
                (pts[j + 1] - pts[j - 1]) / (2.0 * h)
            };
            rescale(d, speed)
        })
        .collect::<Result<Vec<_>>>()?;
    TargetCurve::new(links, samples_per_link, false, pts, tangents)
}

/// As [`ingest_curve`] for a closed input (first point equal to the last);
/// differences wrap around.
pub fn ingest_closed_curve(
    points: &[Vec3],
    links: usize,
    samples_per_link: usize,
) -> Result<TargetCurve> {
    validate_points(points)?;
    check_grid(links, samples_per_link)?;
    if !is_closed_polyline(points) {
        return Err(TangleError::InvalidInput("input curve not closed".into()));
    }
    let count = links * samples_per_link + 1;
    let (mut pts, length) = resample_arc_length(points, count)?;
    pts[count - 1] = pts[0];
    let h = FRAC_PI_2 / samples_per_link as f64;
    let speed = length / (links as f64 * FRAC_PI_2);
    let period = count - 1;
    let mut tangents = (0..period)
        .map(|j| {
            let next = pts[(j + 1) % period];
            let prev = pts[(j + period - 1) % period];
            rescale((next - prev) / (2.0 * h), speed)
        })
        .collect::<Result<Vec<_>>>()?;
    tangents.push(tangents[0]);
    TargetCurve::new(links, samples_per_link, true, pts, tangents)
}

fn rescale(d: Vec3, speed: f64) -> Result<Vec3> {
    let norm = d.norm();
    if norm <= f64::EPSILON * speed {
        return Err(TangleError::DegenerateCurve(
            "repeated points produce a zero tangent".into(),
        ));
    }
    Ok(d * (speed / norm))
}

/// `h(t) = (a cos t, a sin t, b t)` on `[0, nπ/2]` with its exact tangent
/// field; the parameterization already has constant speed `√(a² + b²)`.
pub fn generate_helix(
    a: f64,
    b: f64,
    links: usize,
    samples_per_link: usize,
) -> Result<TargetCurve> {
    if a == 0.0 && b == 0.0 {
        return Err(TangleError::InvalidInput("helix with a = b = 0".into()));
    }
    check_grid(links, samples_per_link)?;
    let h = FRAC_PI_2 / samples_per_link as f64;
    let count = links * samples_per_link + 1;
    let (points, tangents) = (0..count)
        .map(|j| {
            let t = j as f64 * h;
            let (s, c) = t.sin_cos();
            (Vec3::new(a * c, a * s, b * t), Vec3::new(-a * s, a * c, b))
        })
        .unzip();
    TargetCurve::new(links, samples_per_link, false, points, tangents)
}

/// `(a cos t + cos(bt) cos(ct), a sin t + cos(bt) sin(ct), d sin(ct))`.
pub fn closed_test_curve_point(a: f64, b: f64, c: f64, d: f64, t: f64) -> Vec3 {
    let cb = (b * t).cos();
    let (sc, cc) = (c * t).sin_cos();
    Vec3::new(a * t.cos() + cb * cc, a * t.sin() + cb * sc, d * sc)
}

/// Samples the closed test curve at `samples` points on `[0, 2π]` (last
/// point equal to the first) and ingests it for an `n`-link closed fit.
pub fn generate_closed_test_curve(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    samples: usize,
    links: usize,
    samples_per_link: usize,
) -> Result<TargetCurve> {
    if samples < 16 {
        return Err(TangleError::InvalidInput(format!(
            "need at least 16 samples, got {samples}"
        )));
    }
    let mut points: Vec<Vec3> = (0..samples)
        .map(|k| closed_test_curve_point(a, b, c, d, TAU * k as f64 / samples as f64))
        .collect();
    points.push(points[0]);
    ingest_closed_curve(&points, links, samples_per_link)
}

/// Menger curvature `4·area / (|ab||bc||ca|)` of consecutive point triples.
pub fn menger_curvature(points: &[Vec3]) -> Vec<f64> {
    points
        .windows(3)
        .map(|w| {
            let (ab, bc, ca) = (w[1] - w[0], w[2] - w[1], w[0] - w[2]);
            let denom = ab.norm() * bc.norm() * ca.norm();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * ab.cross(&bc).norm() / denom
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn straight_line_has_constant_tangents() {
        let points: Vec<Vec3> = (0..7)
            .map(|k| Vec3::new(-1.0, -1.0, 1.0) * k as f64)
            .collect();
        let target = ingest_curve(&points, 3, 5).unwrap();
        assert_eq!(target.points().len(), 16);
        let speed = target.length() / (3.0 * FRAC_PI_2);
        let dir = Vec3::new(-1.0, -1.0, 1.0).normalize() * speed;
        for t in target.tangents() {
            assert!((t - dir).norm() < 1e-12);
        }
        for w in target.points().windows(2) {
            assert_abs_diff_eq!(
                (w[1] - w[0]).norm(),
                target.length() / 15.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn grid_spacing() {
        let target = generate_helix(1.0, 0.0, 4, 7).unwrap();
        let p = target.params();
        assert_eq!(p.len(), 29);
        assert_abs_diff_eq!(p[1] - p[0], FRAC_PI_2 / 7.0, epsilon = 0.0);
        assert_abs_diff_eq!(
            *p.last().unwrap(),
            2.0 * std::f64::consts::PI,
            epsilon = 1e-14
        );
    }

    #[test]
    fn circle_tangents_are_orthogonal_to_radius() {
        let points: Vec<Vec3> = (0..=400)
            .map(|k| {
                let t = TAU * k as f64 / 400.0;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let target = ingest_closed_curve(&points, 4, 20).unwrap();
        for (p, t) in target.points().iter().zip(target.tangents()) {
            assert!(p.dot(t).abs() / t.norm() < 1e-3);
        }
        assert_eq!(target.points()[0], *target.points().last().unwrap());
    }

    #[test]
    fn ingest_errors() {
        let few = vec![Vec3::zeros(); 3];
        assert!(ingest_curve(&few, 2, 4).is_err());
        let same = vec![Vec3::new(1.0, 2.0, 3.0); 10];
        assert!(matches!(
            ingest_curve(&same, 2, 4),
            Err(TangleError::DegenerateCurve(_))
        ));
        let open: Vec<Vec3> = (0..10).map(|k| Vec3::new(k as f64, 0.0, 0.0)).collect();
        assert!(ingest_closed_curve(&open, 2, 4).is_err());
    }

    #[test]
    fn helix_tangents_are_exact_derivatives() {
        let (a, b) = (1.3, 0.2);
        let target = generate_helix(a, b, 8, 20).unwrap();
        for i in 0..=8 {
            let t = target.tangents()[i * 20];
            let (s, c) = (i as f64 * FRAC_PI_2).sin_cos();
            assert!((t - Vec3::new(-a * s, a * c, b)).norm() < 1e-15);
        }
        assert_eq!(target.tangents()[0], Vec3::new(0.0, a, b));
        assert!((target.tangents()[20] - Vec3::new(-a, 0.0, b)).norm() < 1e-15);
    }

    #[test]
    fn helix_curvature() {
        for (a, b) in [(1.3, 0.2), (1.0, 0.07), (-0.5, 1.0)] {
            let target = generate_helix(a, b, 8, 100).unwrap();
            let k = menger_curvature(target.points());
            let mean = k.iter().sum::<f64>() / k.len() as f64;
            let exact = f64::abs(a) / (a * a + b * b);
            assert!((mean - exact).abs() < 1e-3, "{a} {b}: {mean} vs {exact}");
        }
    }

    #[test]
    fn closed_test_curves() {
        let t = generate_closed_test_curve(2.0, 2.0, 1.0, 1.0, 2000, 12, 20).unwrap();
        assert!(t.is_closed());
        assert_eq!(t.points()[0], *t.points().last().unwrap());
        let planar = generate_closed_test_curve(2.0, 5.0, 5.0, 0.0, 2000, 27, 10).unwrap();
        assert!(planar.points().iter().all(|p| p.z.abs() < 1e-15));
        assert!(generate_closed_test_curve(2.0, 2.0, 1.0, 1.0, 8, 12, 20).is_err());
    }

    #[test]
    fn tangle_sampling_matches_curve() {
        let curve = TangleCurve::new(catalog::six_link_a(), Vec3::new(0.5, 0.0, 1.0));
        let target = TargetCurve::from_tangle(&curve, 10, true).unwrap();
        let params = target.params();
        for (j, t) in params.iter().enumerate() {
            assert!((curve.point(*t).unwrap() - target.points()[j]).norm() < 1e-14);
            assert!((target.tangents()[j].norm() - 1.0).abs() < 1e-14);
        }
        // closed tangle: the last sample returns to the first
        assert!((target.points()[0] - target.points()[60]).norm() < 1e-14);
    }

    #[test]
    fn resampled_spacing_is_nearly_uniform() {
        let dense: Vec<Vec3> = (0..=4000)
            .map(|k| closed_test_curve_point(2.0, 2.0, 1.0, 1.0, TAU * k as f64 / 4000.0))
            .collect();
        let target = ingest_closed_curve(&dense, 12, 20).unwrap();
        let chords: Vec<f64> = target
            .points()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .collect();
        let max = chords.iter().cloned().fold(0.0, f64::max);
        let min = chords.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max - min) / max < 0.01);
    }
}
