//! Geodesics, parallel transport and the Log map on the closed-tangle
//! constraint set.
//!
//! The metric is the ambient Euclidean one on stacked coordinates. A geodesic
//! from `v` with initial velocity `u` solves
//!
//! ```text
//! v' = (Id - JF†JF) r
//! μ  = -(JFᵀ)† r
//! r' = -Σ_k μ_k HF_k v'
//! ```
//!
//! with `v(0) = v`, `r(0) = u`, integrated on `[0, 1]` without re-projection.

use std::sync::Arc;

use log::{debug, warn};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chain::{TangleCurve, Vec3};
use crate::constraint::{ClosedState, ConstraintSystem};
use crate::error::{Result, TangleError};
use crate::linalg::{TruncatedSvd, DEFAULT_RANK_TOLERANCE};
use crate::ode::{Rhs, Rk4, Stepper};
use crate::validation::{validate_chain, ValidationReport};

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Consecutive gap increases after which shooting is declared divergent.
pub const DIVERGENCE_PATIENCE: usize = 5;
const TANGENCY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub v: DVector<f64>,
    pub r: DVector<f64>,
    /// `v'(t) = (Id - JF†JF) r`.
    pub velocity: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct GeodesicPath {
    system: ConstraintSystem,
    pub samples: Vec<GeodesicState>,
    pub step_count: usize,
    /// Residuals of the final sample.
    pub endpoint_report: ValidationReport,
}

impl GeodesicPath {
    pub fn system(&self) -> &ConstraintSystem {
        &self.system
    }

    pub fn start(&self) -> &GeodesicState {
        &self.samples[0]
    }

    pub fn end(&self) -> &GeodesicState {
        self.samples.last().expect("paths are non-empty")
    }

    pub fn end_state(&self) -> ClosedState {
        ClosedState::new(
            self.system.links(),
            self.system.mode(),
            self.end().v.clone(),
        )
        .expect("dimension preserved")
    }

    pub fn state_at(&self, k: usize) -> ClosedState {
        ClosedState::new(
            self.system.links(),
            self.system.mode(),
            self.samples[k].v.clone(),
        )
        .expect("dimension preserved")
    }

    /// Worst residuals over every sample.
    pub fn envelope(&self) -> ValidationReport {
        self.samples
            .iter()
            .map(|s| validate_chain(&self.system.chain_from_coords(&s.v), true))
            .fold(ValidationReport::default(), |acc, r| acc.merge(&r))
    }

    /// `max ‖F(v)‖∞` over every sample.
    pub fn max_constraint_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| self.system.residuals(&s.v).expect("dimension").amax())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone)]
pub struct ExpOptions {
    pub steps: usize,
    pub stepper: Arc<dyn Stepper>,
    pub rank_tolerance: f64,
    /// Gauss–Newton projection of every sample back onto `F = 0` after
    /// integration. Off by default.
    pub project_samples: bool,
}

impl Default for ExpOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            stepper: Arc::new(Rk4),
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            project_samples: false,
        }
    }
}

impl std::fmt::Debug for ExpOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpOptions")
            .field("steps", &self.steps)
            .field("stepper", &self.stepper.name())
            .field("rank_tolerance", &self.rank_tolerance)
            .field("project_samples", &self.project_samples)
            .finish()
    }
}

fn split(y: &DVector<f64>, p: usize) -> (DVector<f64>, DVector<f64>) {
    (y.rows(0, p).into_owned(), y.rows(p, p).into_owned())
}

fn geodesic_field(
    sys: &ConstraintSystem,
    v: &DVector<f64>,
    r: &DVector<f64>,
    tol: f64,
) -> (DVector<f64>, DVector<f64>) {
    let svd = TruncatedSvd::new(&sys.jacobian(v).expect("dimension"), tol);
    let vdot = svd.project_kernel(r);
    let mu = -svd.solve_transpose(r);
    let rdot = -sys.hessian_action(&mu, &vdot);
    (vdot, rdot)
}

fn check_finite(x: &DVector<f64>, t: f64) -> Result<()> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(TangleError::NonFinite { t })
    }
}

fn check_compatible(state: &ClosedState, x: &DVector<f64>) -> Result<()> {
    let p = state.coords().len();
    if x.len() != p {
        return Err(TangleError::LengthMismatch {
            expected: p,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Geodesic from `v0` with initial velocity `u`, 100 RK4 steps by default.
pub fn exp_closed(v0: &ClosedState, u: &DVector<f64>, steps: usize) -> Result<GeodesicPath> {
    exp_closed_with(
        v0,
        u,
        &ExpOptions {
            steps,
            ..ExpOptions::default()
        },
    )
}

pub fn exp_closed_with(
    v0: &ClosedState,
    u: &DVector<f64>,
    opts: &ExpOptions,
) -> Result<GeodesicPath> {
    check_compatible(v0, u)?;
    if opts.steps == 0 {
        return Err(TangleError::InvalidInput("steps must be at least 1".into()));
    }
    check_finite(u, 0.0)?;
    let sys = v0.system();
    let p = sys.dim();
    let tol = opts.rank_tolerance;

    let off_tangent = (sys.jacobian(v0.coords())? * u).amax();
    let u = if off_tangent > TANGENCY_TOLERANCE {
        warn!("initial tangent off the tangent space by {off_tangent:.3e}; projecting");
        sys.project_tangent(v0.coords(), u)?
    } else {
        u.clone()
    };

    let mut y = DVector::zeros(2 * p);
    y.rows_mut(0, p).copy_from(v0.coords());
    y.rows_mut(p, p).copy_from(&u);

    let mut field = |_t: f64, y: &DVector<f64>| {
        let (v, r) = split(y, p);
        let (vd, rd) = geodesic_field(&sys, &v, &r, tol);
        let mut out = DVector::zeros(2 * p);
        out.rows_mut(0, p).copy_from(&vd);
        out.rows_mut(p, p).copy_from(&rd);
        out
    };

    let h = 1.0 / opts.steps as f64;
    let mut states = Vec::with_capacity(opts.steps + 1);
    states.push(y.clone());
    for k in 0..opts.steps {
        let t = k as f64 * h;
        y = opts.stepper.step(&mut field, t, &y, h);
        check_finite(&y, t + h)?;
        states.push(y.clone());
    }

    let mut samples: Vec<GeodesicState> = states
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let (v, r) = split(y, p);
            let velocity =
                TruncatedSvd::new(&sys.jacobian(&v).expect("dimension"), tol).project_kernel(&r);
            GeodesicState {
                t: k as f64 * h,
                v,
                r,
                velocity,
            }
        })
        .collect();

    if opts.project_samples {
        for s in samples.iter_mut().skip(1) {
            s.v = sys.project_to_manifold(&s.v, 1e-12, 20)?;
        }
    }

    let endpoint_report = validate_chain(
        &sys.chain_from_coords(&samples.last().expect("non-empty").v),
        true,
    );
    Ok(GeodesicPath {
        system: sys,
        samples,
        step_count: opts.steps,
        endpoint_report,
    })
}

/// Which end of the path the transported vector starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// From `γ(0)` to `γ(1)`.
    Forward,
    /// From `γ(1)` to `γ(0)` along `γ(1 - t)`.
    Reverse,
}

#[derive(Clone, Debug)]
pub struct Transport {
    /// The transported vector at the far end of the path.
    pub vector: DVector<f64>,
    /// `r` at every traversed sample, starting with the (projected) input.
    pub trajectory: Vec<DVector<f64>>,
    /// `max ‖JF(γ(t_k)) r(t_k)‖∞` over the traversed samples.
    pub max_tangency_residual: f64,
}

/// Cubic Hermite interpolant of a sampled path and its velocity.
struct HermitePath {
    points: Vec<DVector<f64>>,
    velocities: Vec<DVector<f64>>,
    h: f64,
}

impl HermitePath {
    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let m = self.points.len() - 1;
        let k = ((t / self.h).floor() as usize).min(m - 1);
        let s = (t / self.h - k as f64).clamp(0.0, 1.0);
        let (a, b) = (&self.points[k], &self.points[k + 1]);
        let (da, db) = (&self.velocities[k], &self.velocities[k + 1]);
        let h = self.h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let point = a * h00 + da * (h * h10) + b * h01 + db * (h * h11);
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d11 = 3.0 * s2 - 2.0 * s;
        let velocity = (a * d00 - b * d00) / h + da * d10 + db * d11;
        (point, velocity)
    }
}

/// Parallel transport of `r0` along a stored geodesic:
/// `r' = -JFᵀ (JF JFᵀ)† D²F(γ', r)`.
///
/// `r0` is projected onto the tangent space at the starting end first.
/// Off-sample positions use cubic Hermite interpolation of the stored
/// samples and velocities.
pub fn parallel_transport(
    r0: &DVector<f64>,
    path: &GeodesicPath,
    direction: Direction,
) -> Result<Transport> {
    parallel_transport_with(r0, path, direction, &Rk4, DEFAULT_RANK_TOLERANCE)
}

pub fn parallel_transport_with(
    r0: &DVector<f64>,
    path: &GeodesicPath,
    direction: Direction,
    stepper: &dyn Stepper,
    rank_tolerance: f64,
) -> Result<Transport> {
    let sys = path.system();
    if r0.len() != sys.dim() {
        return Err(TangleError::LengthMismatch {
            expected: sys.dim(),
            actual: r0.len(),
        });
    }
    check_finite(r0, 0.0)?;
    let mut points: Vec<DVector<f64>> = path.samples.iter().map(|s| s.v.clone()).collect();
    let mut velocities: Vec<DVector<f64>> =
        path.samples.iter().map(|s| s.velocity.clone()).collect();
    if direction == Direction::Reverse {
        points.reverse();
        velocities.reverse();
        velocities.iter_mut().for_each(|x| x.neg_mut());
    }

    let tangency =
        |v: &DVector<f64>, r: &DVector<f64>| (sys.jacobian(v).expect("dimension") * r).amax();
    let mut r = sys.project_tangent(&points[0], r0)?;
    let mut trajectory = vec![r.clone()];
    let mut max_residual = tangency(&points[0], &r);

    let m = points.len() - 1;
    if m == 0 {
        return Ok(Transport {
            vector: r,
            trajectory,
            max_tangency_residual: max_residual,
        });
    }
    let h = 1.0 / m as f64;
    let curve = HermitePath {
        points,
        velocities,
        h,
    };
    let mut field = |t: f64, r: &DVector<f64>| {
        let (g, gd) = curve.eval(t);
        let jac = sys.jacobian(&g).expect("dimension");
        let svd = TruncatedSvd::new(&jac, rank_tolerance);
        let d2 = sys.second_derivative(&gd, r);
        -(jac.transpose() * svd.solve_gram(&d2))
    };
    let rhs: &mut Rhs<'_> = &mut field;
    for k in 0..m {
        let t = k as f64 * h;
        r = stepper.step(rhs, t, &r, h);
        check_finite(&r, t + h)?;
        max_residual = max_residual.max(tangency(&curve.points[k + 1], &r));
        trajectory.push(r.clone());
    }
    debug!("transport over {m} steps, max tangency residual {max_residual:.3e}");
    Ok(Transport {
        vector: r,
        trajectory,
        max_tangency_residual: max_residual,
    })
}

#[derive(Clone, Debug)]
pub struct LogOptions {
    pub threshold: f64,
    pub max_iters: usize,
    pub exp: ExpOptions,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
            exp: ExpOptions::default(),
        }
    }
}

/// A standard Gaussian vector projected onto the tangent space at `state`
/// and rescaled to length `norm`.
pub fn random_tangent<R: Rng + ?Sized>(
    state: &ClosedState,
    rng: &mut R,
    norm: f64,
) -> Result<DVector<f64>> {
    let g = DVector::from_fn(state.coords().len(), |_, _| rng.sample(StandardNormal));
    let t = state.system().project_tangent(state.coords(), &g)?;
    let len = t.norm();
    if len == 0.0 {
        return Err(TangleError::DegenerateChain(
            "tangent space is trivial".into(),
        ));
    }
    Ok(t * (norm / len))
}

/// [`random_tangent`] drawn from a ChaCha8 stream seeded with `seed`.
pub fn seeded_tangent(state: &ClosedState, seed: u64, norm: f64) -> Result<DVector<f64>> {
    random_tangent(state, &mut ChaCha8Rng::seed_from_u64(seed), norm)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ShootingReport {
    /// Estimated initial velocity at `v0`.
    pub estimate: Vec<f64>,
    /// Number of estimate updates performed.
    pub iterations: usize,
    /// `‖v1 - Exp_{v0}(estimate)‖`.
    pub final_gap: f64,
    pub converged: bool,
    pub diverged: bool,
    /// Gap after every shot, starting with the initial estimate.
    pub gaps: Vec<f64>,
}

impl ShootingReport {
    pub fn estimate_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.estimate)
    }
}

/// Shooting-method Log map with default exp options.
pub fn log_closed(
    v0: &ClosedState,
    v1: &ClosedState,
    threshold: f64,
    max_iters: usize,
) -> Result<ShootingReport> {
    log_closed_with(
        v0,
        v1,
        &LogOptions {
            threshold,
            max_iters,
            ..LogOptions::default()
        },
    )
}

pub fn log_closed_with(
    v0: &ClosedState,
    v1: &ClosedState,
    opts: &LogOptions,
) -> Result<ShootingReport> {
    if v0.links() != v1.links() || v0.mode() != v1.mode() {
        return Err(TangleError::InvalidInput(
            "endpoints must share link count and first-link mode".into(),
        ));
    }
    for (name, s) in [("v0", v0), ("v1", v1)] {
        let drift = s.system().residuals(s.coords())?.amax();
        if drift > 1e-6 {
            return Err(TangleError::InvalidInput(format!(
                "{name} is off the manifold (‖F‖∞ = {drift:.3e})"
            )));
        }
    }
    let sys = v0.system();
    let target = v1.coords();
    let mut estimate = sys.project_tangent(v0.coords(), &(target - v0.coords()))?;
    let mut gaps = Vec::new();
    let mut iterations = 0;
    let mut rising = 0;
    let mut converged = false;
    let mut diverged = false;
    loop {
        let path = exp_closed_with(v0, &estimate, &opts.exp)?;
        let w = &path.end().v;
        let gap = (target - w).norm();
        debug!("shooting iteration {iterations}: gap {gap:.3e}");
        if let Some(&prev) = gaps.last() {
            rising = if gap > prev { rising + 1 } else { 0 };
        }
        gaps.push(gap);
        if gap <= opts.threshold {
            converged = true;
            break;
        }
        if rising >= DIVERGENCE_PATIENCE {
            diverged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        let miss = sys.project_tangent(w, &(target - w))?;
        let correction = parallel_transport(&miss, &path, Direction::Reverse)?;
        estimate += correction.vector;
        iterations += 1;
    }
    Ok(ShootingReport {
        estimate: estimate.iter().copied().collect(),
        iterations,
        final_gap: *gaps.last().expect("at least one shot"),
        converged,
        diverged,
        gaps,
    })
}

/// Converts every sample to a tangle curve with zero base translation.
pub fn geodesic_to_tangles(path: &GeodesicPath) -> Vec<TangleCurve> {
    path.samples
        .iter()
        .map(|s| TangleCurve::new(path.system().chain_from_coords(&s.v), Vec3::zeros()))
        .collect()
}
