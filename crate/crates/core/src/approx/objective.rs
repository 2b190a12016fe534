//! Tangent-field matching cost and tangle constraint penalties.
//!
//! The unknowns are stacked tangents `x = (V_0, …, V_{K-1})`. Open fits use
//! `K = n + 1`; closed fits use `K = n` and read `V_n` as `V_0`.

use nalgebra::{DMatrix, DVector};

use super::solver::LeastSquares;
use super::target::TargetCurve;
use crate::chain::{TangentChain, Vec3};
use crate::error::{Result, TangleError};

fn vec_at(x: &DVector<f64>, k: usize) -> Vec3 {
    Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2])
}

/// Number of stacked tangents for `links` links.
pub fn num_vectors(links: usize, closed: bool) -> usize {
    if closed {
        links
    } else {
        links + 1
    }
}

/// Stacks the free tangents of a chain.
pub fn stack_chain(chain: &TangentChain, closed: bool) -> DVector<f64> {
    let k = num_vectors(chain.links(), closed);
    DVector::from_iterator(
        3 * k,
        chain.vectors()[..k].iter().flat_map(|v| v.iter().copied()),
    )
}

/// Rebuilds `V_0..V_n` from stacked tangents.
pub fn unstack_chain(x: &DVector<f64>, links: usize, closed: bool) -> TangentChain {
    let mut v: Vec<Vec3> = (0..num_vectors(links, closed))
        .map(|k| vec_at(x, k))
        .collect();
    if closed {
        v.push(v[0]);
    }
    TangentChain::from_vectors_unchecked(v)
}

/// Trapezoid discretization of
/// `J(V) = Σ_i ∫ ‖ṗ(t) - V_i cos(t - t_i) - V_{i+1} sin(t - t_i)‖² dt`.
#[derive(Clone, Debug)]
pub struct TangentFieldObjective<'a> {
    target: &'a TargetCurve,
    closed: bool,
    /// `(grid index, link, cos τ, sin τ, √weight)` per quadrature node.
    nodes: Vec<(usize, usize, f64, f64, f64)>,
}

impl<'a> TangentFieldObjective<'a> {
    pub fn new(target: &'a TargetCurve, closed: bool) -> Self {
        let m = target.samples_per_link();
        let h = target.spacing();
        let mut nodes = Vec::with_capacity(target.links() * (m + 1));
        for i in 0..target.links() {
            for k in 0..=m {
                let w = if k == 0 || k == m { 0.5 * h } else { h };
                let (s, c) = (k as f64 * h).sin_cos();
                nodes.push((i * m + k, i, c, s, w.sqrt()));
            }
        }
        Self {
            target,
            closed,
            nodes,
        }
    }

    pub fn links(&self) -> usize {
        self.target.links()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn num_vectors(&self) -> usize {
        num_vectors(self.links(), self.closed)
    }

    pub fn dim(&self) -> usize {
        3 * self.num_vectors()
    }

    fn slot(&self, i: usize) -> usize {
        i % self.num_vectors()
    }

    /// Weighted residuals `√w_j (ṗ_j - model_j)`; their squared norm is `J`.
    pub fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let tangents = self.target.tangents();
        let mut out = DVector::zeros(3 * self.nodes.len());
        for (row, &(j, i, c, s, w)) in self.nodes.iter().enumerate() {
            let model = vec_at(x, self.slot(i)) * c + vec_at(x, self.slot(i + 1)) * s;
            let e = (tangents[j] - model) * w;
            out.rows_mut(3 * row, 3).copy_from(&e);
        }
        out
    }

    /// Constant Jacobian of [`Self::residuals`].
    pub fn jacobian(&self) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3 * self.nodes.len(), self.dim());
        for (row, &(_, i, c, s, w)) in self.nodes.iter().enumerate() {
            let (a, b) = (self.slot(i), self.slot(i + 1));
            for d in 0..3 {
                jac[(3 * row + d, 3 * a + d)] -= c * w;
                jac[(3 * row + d, 3 * b + d)] -= s * w;
            }
        }
        jac
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    /// `J` and its gradient with respect to every stacked tangent.
    pub fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let tangents = self.target.tangents();
        let mut value = 0.0;
        let mut grad = DVector::zeros(self.dim());
        for &(j, i, c, s, w) in &self.nodes {
            let (a, b) = (self.slot(i), self.slot(i + 1));
            let e = tangents[j] - vec_at(x, a) * c - vec_at(x, b) * s;
            let w2 = w * w;
            value += w2 * e.norm_squared();
            for d in 0..3 {
                grad[3 * a + d] -= 2.0 * w2 * c * e[d];
                grad[3 * b + d] -= 2.0 * w2 * s * e[d];
            }
        }
        (value, grad)
    }
}

/// `J(V)` and `∂J/∂V_i` for an open chain of `n + 1` tangents.
pub fn objective_j(chain: &TangentChain, target: &TargetCurve) -> Result<(f64, Vec<Vec3>)> {
    if chain.links() != target.links() {
        return Err(TangleError::LengthMismatch {
            expected: target.links(),
            actual: chain.links(),
        });
    }
    let obj = TangentFieldObjective::new(target, false);
    let (value, grad) = obj.value_and_gradient(&stack_chain(chain, false));
    Ok((
        value,
        (0..obj.num_vectors()).map(|k| vec_at(&grad, k)).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Term {
    Dot(usize, usize),
    NormSq(usize),
    Closure(usize),
}

/// Tangle constraints on stacked tangents.
///
/// Open: `⟨V_i, V_{i+1}⟩` for `i < n` and `‖V_i‖² - 1` for `i ≤ n`.
/// Closed (with `V_n = V_0`): `⟨V_i, V_{i+1}⟩` for `i < n`, which includes
/// `⟨V_{n-1}, V_0⟩`, `‖V_i‖² - 1` for `i < n`, and `Σ V_i = 0`.
#[derive(Clone, Debug)]
pub struct TangleConstraints {
    count: usize,
    terms: Vec<Term>,
}

impl TangleConstraints {
    pub fn new(links: usize, closed: bool) -> Self {
        let count = num_vectors(links, closed);
        let mut terms: Vec<Term> = (0..links).map(|i| Term::Dot(i, (i + 1) % count)).collect();
        terms.extend((0..count).map(Term::NormSq));
        if closed {
            terms.extend((0..3).map(Term::Closure));
        }
        Self { count, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let sum: Vec3 = (0..self.count).map(|k| vec_at(x, k)).sum();
        DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| match *t {
                Term::Dot(i, j) => vec_at(x, i).dot(&vec_at(x, j)),
                Term::NormSq(i) => vec_at(x, i).norm_squared() - 1.0,
                Term::Closure(axis) => sum[axis],
            }),
        )
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.terms.len(), 3 * self.count);
        for (row, term) in self.terms.iter().enumerate() {
            match *term {
                Term::Dot(i, j) => {
                    let (vi, vj) = (vec_at(x, i), vec_at(x, j));
                    for d in 0..3 {
                        jac[(row, 3 * i + d)] += vj[d];
                        jac[(row, 3 * j + d)] += vi[d];
                    }
                }
                Term::NormSq(i) => {
                    let vi = vec_at(x, i);
                    for d in 0..3 {
                        jac[(row, 3 * i + d)] = 2.0 * vi[d];
                    }
                }
                Term::Closure(axis) => {
                    for k in 0..self.count {
                        jac[(row, 3 * k + axis)] = 1.0;
                    }
                }
            }
        }
        jac
    }

    /// `max |c_k|`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).amax()
    }
}

/// `J(x) + μ Σ c_k(x)²` as one least-squares system.
pub struct PenalizedProblem<'a> {
    objective: &'a TangentFieldObjective<'a>,
    constraints: &'a TangleConstraints,
    fit_jacobian: DMatrix<f64>,
    weight: f64,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new(
        objective: &'a TangentFieldObjective<'a>,
        constraints: &'a TangleConstraints,
        weight: f64,
    ) -> Self {
        Self {
            objective,
            constraints,
            fit_jacobian: objective.jacobian(),
            weight,
        }
    }
}

impl LeastSquares for PenalizedProblem<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let fit = self.objective.residuals(x);
        let pen = self.constraints.residuals(x) * self.weight.sqrt();
        DVector::from_iterator(fit.len() + pen.len(), fit.iter().chain(pen.iter()).copied())
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let pen = self.constraints.jacobian(x) * self.weight.sqrt();
        let rows = self.fit_jacobian.nrows();
        let mut jac = DMatrix::zeros(rows + pen.nrows(), self.dim());
        jac.rows_mut(0, rows).copy_from(&self.fit_jacobian);
        jac.rows_mut(rows, pen.nrows()).copy_from(&pen);
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::target::generate_helix;
    use crate::catalog;
    use crate::chain::TangleCurve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
        DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn own_tangent_field_has_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chain = catalog::random_open_chain(&mut rng, 8);
        let target =
            TargetCurve::from_tangle(&TangleCurve::new(chain.clone(), Vec3::zeros()), 12, false)
                .unwrap();
        let (value, grad) = objective_j(&chain, &target).unwrap();
        assert!(value < 1e-28);
        assert!(grad.iter().all(|g| g.norm() < 1e-13));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = generate_helix(1.3, 0.2, 5, 8).unwrap();
        for closed in [false, true] {
            let obj = TangentFieldObjective::new(&target, closed);
            for _ in 0..10 {
                let x = random_x(&mut rng, obj.dim());
                let (_, grad) = obj.value_and_gradient(&x);
                let h = 1e-5;
                for k in 0..obj.dim() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (obj.value(&xp) - obj.value(&xm)) / (2.0 * h);
                    assert!((fd - grad[k]).abs() < 1e-6, "{k}: {fd} vs {}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn cost_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = generate_helix(1.0, 0.07, 4, 10).unwrap();
        let obj = TangentFieldObjective::new(&target, false);
        let h = random_x(&mut rng, obj.dim());
        let second =
            |x: &DVector<f64>| obj.value(&(x + &h)) - 2.0 * obj.value(x) + obj.value(&(x - &h));
        let a = second(&random_x(&mut rng, obj.dim()));
        let b = second(&random_x(&mut rng, obj.dim()));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn value_and_residual_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = generate_helix(-0.5, 1.0, 3, 6).unwrap();
        let obj = TangentFieldObjective::new(&target, true);
        let x = random_x(&mut rng, obj.dim());
        let (value, grad) = obj.value_and_gradient(&x);
        assert!((value - obj.value(&x)).abs() < 1e-12);
        let jg = obj.jacobian().transpose() * obj.residuals(&x) * 2.0;
        assert!((jg - grad).amax() < 1e-12);
    }

    #[test]
    fn constraint_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for closed in [false, true] {
            let c = TangleConstraints::new(6, closed);
            let x = random_x(&mut rng, 3 * num_vectors(6, closed));
            let jac = c.jacobian(&x);
            let h = 1e-6;
            for k in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (c.residuals(&xp) - c.residuals(&xm)) / (2.0 * h);
                assert!((fd - jac.column(k)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn tangles_satisfy_constraints() {
        let c = TangleConstraints::new(8, true);
        assert_eq!(c.len(), 8 + 8 + 3);
        let x = stack_chain(&catalog::doubled_circle8(), true);
        assert_eq!(c.max_violation(&x), 0.0);
        assert_eq!(unstack_chain(&x, 8, true), catalog::doubled_circle8());
        let open = TangleConstraints::new(8, false);
        assert_eq!(open.len(), 8 + 9);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let chain = catalog::random_open_chain(&mut rng, 8);
        assert!(open.max_violation(&stack_chain(&chain, false)) < 1e-14);
    }
}
