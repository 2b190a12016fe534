//! Penalty-method tangle fitting.

use std::sync::Arc;

use log::{debug, info, warn};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::objective::{
    num_vectors, stack_chain, unstack_chain, PenalizedProblem, TangentFieldObjective,
    TangleConstraints,
};
use super::procrustes::{procrustes_align, rms_distance, RigidTransform};
use super::solver::{InnerSolver, LevenbergMarquardt};
use super::target::TargetCurve;
use crate::chain::{TangentChain, TangleCurve, Vec3};
use crate::error::{Result, TangleError};

/// Target for `max |c_k|` at which the outer loop stops early.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub initial_weight: f64,
    pub growth_factor: f64,
    pub outer_iterations: usize,
    /// Gradient-norm tolerance of each inner solve.
    pub inner_tolerance: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial_weight: 1.0,
            growth_factor: 10.0,
            outer_iterations: 8,
            inner_tolerance: 1e-8,
        }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_weight > 0.0
            && self.growth_factor > 1.0
            && self.outer_iterations > 0
            && self.inner_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TangleError::InvalidInput(format!(
                "invalid penalty schedule {self:?}"
            )))
        }
    }
}

#[derive(Clone)]
pub struct FitOptions {
    pub schedule: PenaltySchedule,
    pub solver: Arc<dyn InnerSolver>,
    /// Extra randomly perturbed starts; the best feasible result wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            schedule: PenaltySchedule::default(),
            solver: Arc::new(LevenbergMarquardt::default()),
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub weight: f64,
    pub objective: f64,
    pub constraint_residual: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub links: usize,
    pub closed: bool,
    /// Fitted tangents `V_0..V_n` before alignment.
    pub vectors: Vec<[f64; 3]>,
    /// Discretized `J` of the final chain.
    pub objective: f64,
    /// `max |c_k|` over the tangle constraints of the chosen mode.
    pub constraint_residual: f64,
    /// Maps the fitted tangle (base translation 0) onto the target.
    pub rigid_transform: RigidTransform,
    pub rms_point_error: f64,
    pub converged: bool,
    pub solver: String,
    pub stages: Vec<StageReport>,
}

impl FitReport {
    pub fn chain(&self) -> TangentChain {
        TangentChain::from_vectors_unchecked(self.vectors.iter().map(|v| Vec3::from(*v)).collect())
    }

    /// The fitted tangle after rigid alignment.
    pub fn aligned_curve(&self) -> TangleCurve {
        let r = self.rigid_transform.rotation_matrix();
        TangleCurve::new(
            self.chain().rotated(&r),
            self.rigid_transform.translation_vector(),
        )
    }
}

fn orthogonalize(v: &Vec3, against: &Vec3) -> Vec3 {
    v - against * (against.dot(v) / against.norm_squared())
}

/// Unit vector orthogonal to `a`, preferring the direction of `hint`.
fn perpendicular(a: &Vec3, hint: Option<&Vec3>) -> Vec3 {
    if let Some(h) = hint {
        let w = a.cross(h);
        if w.norm() > 1e-8 {
            return w.normalize();
        }
    }
    let axis = a.iamin();
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    orthogonalize(&e, a).normalize()
}

/// Target tangents at the knots, normalized and made orthogonal to their
/// predecessor in one Gram–Schmidt sweep.
pub fn initial_chain(target: &TargetCurve, closed: bool) -> TangentChain {
    let m = target.samples_per_link();
    let count = num_vectors(target.links(), closed);
    let mut v: Vec<Vec3> = Vec::with_capacity(count + 1);
    for i in 0..count {
        let t = target.tangents()[i * m];
        let raw = if t.norm() > 1e-12 {
            t.normalize()
        } else {
            Vec3::x()
        };
        let next = match v.last() {
            None => raw,
            Some(prev) => {
                let w = orthogonalize(&raw, prev);
                if w.norm() > 1e-6 {
                    w.normalize()
                } else {
                    perpendicular(prev, v.iter().rev().nth(1))
                }
            }
        };
        v.push(next);
    }
    if closed {
        v.push(v[0]);
    }
    TangentChain::from_vectors_unchecked(v)
}

struct Run {
    x: DVector<f64>,
    stages: Vec<StageReport>,
    objective: f64,
    residual: f64,
}

fn run_schedule(
    objective: &TangentFieldObjective<'_>,
    constraints: &TangleConstraints,
    x0: DVector<f64>,
    opts: &FitOptions,
) -> Run {
    let schedule = &opts.schedule;
    let mut x = x0;
    let mut weight = schedule.initial_weight;
    let mut stages = Vec::new();
    for stage in 0..schedule.outer_iterations {
        let problem = PenalizedProblem::new(objective, constraints, weight);
        let out = opts.solver.minimize(&problem, x, schedule.inner_tolerance);
        x = out.x;
        let report = StageReport {
            weight,
            objective: objective.value(&x),
            constraint_residual: constraints.max_violation(&x),
            inner_iterations: out.iterations,
            inner_converged: out.converged,
        };
        debug!("stage {stage}: {report:?}");
        let done = report.constraint_residual < FEASIBILITY_TOLERANCE;
        stages.push(report);
        if done {
            break;
        }
        weight *= schedule.growth_factor;
    }
    Run {
        objective: objective.value(&x),
        residual: constraints.max_violation(&x),
        x,
        stages,
    }
}

fn fit(target: &TargetCurve, links: usize, closed: bool, opts: &FitOptions) -> Result<FitReport> {
    opts.schedule.validate()?;
    if target.links() != links {
        return Err(TangleError::InvalidInput(format!(
            "target sampled for {} links, fit requested with {links}",
            target.links()
        )));
    }
    if closed && !target.is_closed() {
        return Err(TangleError::InvalidInput("input curve not closed".into()));
    }
    let objective = TangentFieldObjective::new(target, closed);
    let constraints = TangleConstraints::new(links, closed);
    let x0 = stack_chain(&initial_chain(target, closed), closed);

    let mut best = run_schedule(&objective, &constraints, x0.clone(), opts);
    if opts.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let noise = Normal::new(0.0, 0.3).expect("valid deviation");
        for k in 0..opts.restarts {
            let start = x0.map(|c| c + noise.sample(&mut rng));
            let run = run_schedule(&objective, &constraints, start, opts);
            let feasible = run.residual < FEASIBILITY_TOLERANCE;
            let best_feasible = best.residual < FEASIBILITY_TOLERANCE;
            if (feasible && !best_feasible)
                || (feasible == best_feasible && run.objective < best.objective)
            {
                info!("restart {k} improved objective to {:.3e}", run.objective);
                best = run;
            }
        }
    }

    let chain = unstack_chain(&best.x, links, closed);
    let curve = TangleCurve::new(chain.clone(), Vec3::zeros());
    let fitted: Vec<Vec3> = fitted_points(&curve, target)?;
    let transform = procrustes_align(&fitted, target.points())?;
    let aligned: Vec<Vec3> = fitted.iter().map(|p| transform.apply(p)).collect();
    let converged = best.residual < FEASIBILITY_TOLERANCE;
    if !converged {
        warn!(
            "fit did not reach feasibility: residual {:.3e} after {} stages",
            best.residual,
            best.stages.len()
        );
    }
    Ok(FitReport {
        links,
        closed,
        vectors: chain.vectors().iter().map(|v| (*v).into()).collect(),
        objective: best.objective,
        constraint_residual: best.residual,
        rigid_transform: transform,
        rms_point_error: rms_distance(&aligned, target.points()),
        converged,
        solver: opts.solver.name().to_string(),
        stages: best.stages,
    })
}

/// Points of a tangle at the target's grid parameters.
pub fn fitted_points(curve: &TangleCurve, target: &TargetCurve) -> Result<Vec<Vec3>> {
    let m = target.samples_per_link();
    let h = target.spacing();
    (0..target.points().len())
        .map(|j| {
            let (i, k) = (j / m, j % m);
            if i == curve.links() {
                curve.link_point(i - 1, std::f64::consts::FRAC_PI_2)
            } else {
                curve.link_point(i, k as f64 * h)
            }
        })
        .collect()
}

/// Fits an open `n`-link tangle to the target's tangent field.
pub fn fit_open(
    target: &TargetCurve,
    links: usize,
    schedule: PenaltySchedule,
) -> Result<FitReport> {
    fit_open_with(
        target,
        links,
        &FitOptions {
            schedule,
            ..FitOptions::default()
        },
    )
}

pub fn fit_open_with(target: &TargetCurve, links: usize, opts: &FitOptions) -> Result<FitReport> {
    fit(target, links, false, opts)
}

/// Fits a closed `n`-link tangle; `V_n` is identified with `V_0`.
pub fn fit_closed(
    target: &TargetCurve,
    links: usize,
    schedule: PenaltySchedule,
) -> Result<FitReport> {
    fit_closed_with(
        target,
        links,
        &FitOptions {
            schedule,
            ..FitOptions::default()
        },
    )
}

pub fn fit_closed_with(target: &TargetCurve, links: usize, opts: &FitOptions) -> Result<FitReport> {
    fit(target, links, true, opts)
}
