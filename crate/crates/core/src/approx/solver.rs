//! Unconstrained minimizers for `‖r(x)‖²`.

use log::trace;
use nalgebra::{DMatrix, DVector};

/// A residual map `r: R^p → R^m`; the cost is `‖r(x)‖²`.
pub trait LeastSquares {
    fn dim(&self) -> usize;
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    fn cost(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.jacobian(x).transpose() * self.residuals(x) * 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerOutcome {
    pub x: DVector<f64>,
    pub cost: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Gradient norm reached the requested tolerance.
    pub converged: bool,
}

pub trait InnerSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Minimizes from `x0` until the gradient norm is at most `tol`, or the
    /// solver stalls or exhausts its iteration budget.
    fn minimize(&self, problem: &dyn LeastSquares, x0: DVector<f64>, tol: f64) -> InnerOutcome;
}

/// Steepest descent with Armijo backtracking.
#[derive(Clone, Debug)]
pub struct GradientDescent {
    pub max_iters: usize,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for GradientDescent {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

impl InnerSolver for GradientDescent {
    fn name(&self) -> &'static str {
        "gradient-descent"
    }

    fn minimize(&self, problem: &dyn LeastSquares, x0: DVector<f64>, tol: f64) -> InnerOutcome {
        let mut x = x0;
        let mut cost = problem.cost(&x);
        let mut step = 1.0;
        let mut iterations = 0;
        loop {
            let grad = problem.gradient(&x);
            let gnorm = grad.norm();
            if gnorm <= tol || iterations >= self.max_iters {
                return InnerOutcome {
                    x,
                    cost,
                    gradient_norm: gnorm,
                    iterations,
                    converged: gnorm <= tol,
                };
            }
            let g2 = gnorm * gnorm;
            let mut accepted = false;
            while step * gnorm > f64::EPSILON * (1.0 + x.norm()) {
                let trial = &x - &grad * step;
                let trial_cost = problem.cost(&trial);
                if trial_cost <= cost - self.armijo * step * g2 {
                    x = trial;
                    cost = trial_cost;
                    accepted = true;
                    break;
                }
                step *= self.shrink;
            }
            iterations += 1;
            if !accepted {
                trace!("line search stalled at iteration {iterations}");
                return InnerOutcome {
                    x,
                    cost,
                    gradient_norm: gnorm,
                    iterations,
                    converged: false,
                };
            }
            step /= self.shrink;
        }
    }
}

/// Levenberg–Marquardt with Nielsen's damping update.
#[derive(Clone, Debug)]
pub struct LevenbergMarquardt {
    pub max_iters: usize,
    /// Initial damping relative to `max diag(JᵀJ)`.
    pub initial_damping: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iters: 500,
            initial_damping: 1e-6,
        }
    }
}

impl InnerSolver for LevenbergMarquardt {
    fn name(&self) -> &'static str {
        "levenberg-marquardt"
    }

    fn minimize(&self, problem: &dyn LeastSquares, x0: DVector<f64>, tol: f64) -> InnerOutcome {
        let mut x = x0;
        let mut r = problem.residuals(&x);
        let mut cost = r.norm_squared();
        let mut jac = problem.jacobian(&x);
        let mut jtj = jac.transpose() * &jac;
        let mut grad = jac.transpose() * &r * 2.0;
        let mut lambda = self.initial_damping * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut nu = 2.0;
        let mut iterations = 0;
        while iterations < self.max_iters && grad.norm() > tol {
            iterations += 1;
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let delta = chol.solve(&(-&grad * 0.5));
            if delta.norm() <= f64::EPSILON * (x.norm() + f64::EPSILON) {
                break;
            }
            let trial = &x + &delta;
            let trial_r = problem.residuals(&trial);
            let trial_cost = trial_r.norm_squared();
            // predicted decrease of the Gauss–Newton model
            let predicted = -(delta.dot(&grad) + delta.dot(&(&jtj * &delta)));
            let rho = (cost - trial_cost) / predicted;
            if predicted > 0.0 && rho > 0.0 {
                x = trial;
                r = trial_r;
                cost = trial_cost;
                jac = problem.jacobian(&x);
                jtj = jac.transpose() * &jac;
                grad = jac.transpose() * &r * 2.0;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
            } else {
                lambda *= nu;
                nu *= 2.0;
                if !lambda.is_finite() || lambda > 1e300 {
                    break;
                }
            }
        }
        let gradient_norm = grad.norm();
        InnerOutcome {
            x,
            cost,
            gradient_norm,
            iterations,
            converged: gradient_norm <= tol,
        }
    }
}
