//! Closed tangles as the zero set of a quadratic constraint map.
//!
//! With the first link fixed to the canonical arc, a closed `n`-link tangle
//! is the stacked vector `v = (V_2, …, V_{n-1}) ∈ R^{3n-6}` subject to `2n`
//! constraints, in this order:
//!
//! 1. `⟨V_i, V_{i+1}⟩` for `i = 1..=n-2`
//! 2. `⟨V_0, V_{n-1}⟩`
//! 3. `‖V_i‖² - 1` for `i = 2..=n-1`
//! 4. `Σ_{i<n} V_i` (three rows, x/y/z)
//!
//! In [`FirstLink::Free`] mode `V_0, V_1` join the state (`p = 3n`) and the
//! constraints `⟨V_0, V_1⟩`, `‖V_0‖² - 1`, `‖V_1‖² - 1` are added in the
//! corresponding groups (`q = 2n + 3`).
//!
//! All constraints are at most quadratic, so the Hessians are constant.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::chain::{canonical_v0, canonical_v1, TangentChain, Vec3};
use crate::error::{Result, TangleError};
use crate::linalg::{TruncatedSvd, DEFAULT_RANK_TOLERANCE};

/// Whether the first link is pinned to the canonical arc.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstLink {
    /// Shape space: rigid motions factored out.
    #[default]
    Fixed,
    /// Configuration space: `V_0, V_1` are free variables.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Term {
    Dot(usize, usize),
    NormSq(usize),
    Closure(usize),
}

/// The constraint map `F` for a given link count and mode.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    links: usize,
    mode: FirstLink,
    terms: Vec<Term>,
}

impl ConstraintSystem {
    pub fn new(links: usize, mode: FirstLink) -> Result<Self> {
        if links < 4 {
            return Err(TangleError::InvalidInput(format!(
                "closed tangles need at least 4 links, got {links}"
            )));
        }
        let first_dot = match mode {
            FirstLink::Fixed => 1,
            FirstLink::Free => 0,
        };
        let first_free = Self::first_free_index(mode);
        let mut terms = Vec::with_capacity(2 * links + 3);
        terms.extend((first_dot..links - 1).map(|i| Term::Dot(i, i + 1)));
        terms.push(Term::Dot(0, links - 1));
        terms.extend((first_free..links).map(Term::NormSq));
        terms.extend((0..3).map(Term::Closure));
        Ok(Self { links, mode, terms })
    }

    fn first_free_index(mode: FirstLink) -> usize {
        match mode {
            FirstLink::Fixed => 2,
            FirstLink::Free => 0,
        }
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn mode(&self) -> FirstLink {
        self.mode
    }

    /// State dimension `p`.
    pub fn dim(&self) -> usize {
        3 * (self.links - Self::first_free_index(self.mode))
    }

    /// Number of constraints `q`.
    pub fn num_constraints(&self) -> usize {
        self.terms.len()
    }

    /// Offset of `V_i` in the state vector, if it is a free variable.
    fn block(&self, i: usize) -> Option<usize> {
        let first = Self::first_free_index(self.mode);
        (i >= first && i < self.links).then(|| 3 * (i - first))
    }

    fn vector(&self, v: &DVector<f64>, i: usize) -> Vec3 {
        match self.block(i) {
            Some(o) => Vec3::new(v[o], v[o + 1], v[o + 2]),
            None if i == 0 => canonical_v0(),
            None => canonical_v1(),
        }
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(TangleError::LengthMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// `F(v)`.
    pub fn residuals(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(v)?;
        let vecs: Vec<Vec3> = (0..self.links).map(|i| self.vector(v, i)).collect();
        let sum: Vec3 = vecs.iter().sum();
        Ok(DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| match *t {
                Term::Dot(i, j) => vecs[i].dot(&vecs[j]),
                Term::NormSq(i) => vecs[i].norm_squared() - 1.0,
                Term::Closure(axis) => sum[axis],
            }),
        ))
    }

    /// Analytic Jacobian `JF(v)`, a `q × p` matrix.
    pub fn jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(v)?;
        let mut jac = DMatrix::zeros(self.num_constraints(), self.dim());
        for (row, term) in self.terms.iter().enumerate() {
            match *term {
                Term::Dot(i, j) => {
                    if let Some(o) = self.block(i) {
                        let vj = self.vector(v, j);
                        jac.view_mut((row, o), (1, 3)).copy_from(&vj.transpose());
                    }
                    if let Some(o) = self.block(j) {
                        let vi = self.vector(v, i);
                        jac.view_mut((row, o), (1, 3)).copy_from(&vi.transpose());
                    }
                }
                Term::NormSq(i) => {
                    let o = self.block(i).expect("norm terms are free");
                    let vi = self.vector(v, i) * 2.0;
                    jac.view_mut((row, o), (1, 3)).copy_from(&vi.transpose());
                }
                Term::Closure(axis) => {
                    for i in 0..self.links {
                        if let Some(o) = self.block(i) {
                            jac[(row, o + axis)] = 1.0;
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// The constant Hessians `HF_1..HF_q`, each `p × p`.
    pub fn hessians(&self) -> HessianStack {
        let p = self.dim();
        let matrices = self
            .terms
            .iter()
            .map(|term| {
                let mut h = DMatrix::zeros(p, p);
                match *term {
                    Term::Dot(i, j) => {
                        if let (Some(a), Some(b)) = (self.block(i), self.block(j)) {
                            h.view_mut((a, b), (3, 3)).copy_from(&Matrix3::identity());
                            h.view_mut((b, a), (3, 3)).copy_from(&Matrix3::identity());
                        }
                    }
                    Term::NormSq(i) => {
                        let a = self.block(i).expect("norm terms are free");
                        h.view_mut((a, a), (3, 3))
                            .copy_from(&(Matrix3::identity() * 2.0));
                    }
                    Term::Closure(_) => {}
                }
                h
            })
            .collect();
        HessianStack { matrices }
    }

    /// `D²F(a, b)`, the vector with components `aᵀ HF_k b`, without
    /// materializing the Hessians.
    pub fn second_derivative(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let block = |x: &DVector<f64>, o: usize| Vec3::new(x[o], x[o + 1], x[o + 2]);
        DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| match *t {
                Term::Dot(i, j) => match (self.block(i), self.block(j)) {
                    (Some(oi), Some(oj)) => {
                        block(a, oi).dot(&block(b, oj)) + block(a, oj).dot(&block(b, oi))
                    }
                    _ => 0.0,
                },
                Term::NormSq(i) => {
                    let o = self.block(i).expect("norm terms are free");
                    2.0 * block(a, o).dot(&block(b, o))
                }
                Term::Closure(_) => 0.0,
            }),
        )
    }

    /// `Σ_k μ_k HF_k x`.
    pub fn hessian_action(&self, mu: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (term, &m) in self.terms.iter().zip(mu.iter()) {
            match *term {
                Term::Dot(i, j) => {
                    if let (Some(oi), Some(oj)) = (self.block(i), self.block(j)) {
                        for a in 0..3 {
                            out[oi + a] += m * x[oj + a];
                            out[oj + a] += m * x[oi + a];
                        }
                    }
                }
                Term::NormSq(i) => {
                    let o = self.block(i).expect("norm terms are free");
                    for a in 0..3 {
                        out[o + a] += 2.0 * m * x[o + a];
                    }
                }
                Term::Closure(_) => {}
            }
        }
        out
    }

    /// Gauss–Newton iteration `v ← v - JF† F` until `‖F‖∞ ≤ tol`.
    pub fn project_to_manifold(
        &self,
        v: &DVector<f64>,
        tol: f64,
        max_iters: usize,
    ) -> Result<DVector<f64>> {
        let mut v = v.clone();
        for _ in 0..max_iters {
            let f = self.residuals(&v)?;
            if f.amax() <= tol {
                break;
            }
            let svd = TruncatedSvd::new(&self.jacobian(&v)?, DEFAULT_RANK_TOLERANCE);
            v -= svd.solve(&f);
        }
        Ok(v)
    }

    /// `(Id - JF†JF) r`, the orthogonal projection onto `ker JF(v)`.
    pub fn project_tangent(&self, v: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(r)?;
        let svd = TruncatedSvd::new(&self.jacobian(v)?, DEFAULT_RANK_TOLERANCE);
        Ok(svd.project_kernel(r))
    }

    pub fn numerical_rank(&self, v: &DVector<f64>, rel_tol: f64) -> Result<usize> {
        Ok(TruncatedSvd::new(&self.jacobian(v)?, rel_tol).rank())
    }

    /// `‖F(v)‖∞ ≤ tol`.
    pub fn is_on_manifold(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.residuals(v)?.amax() <= tol)
    }

    /// Stacks the free tangents of a closed chain (`n` or `n + 1` vectors).
    pub fn state_from_chain(&self, chain: &TangentChain) -> Result<ClosedState> {
        let v = chain.vectors();
        if v.len() != self.links && v.len() != self.links + 1 {
            return Err(TangleError::LengthMismatch {
                expected: self.links + 1,
                actual: v.len(),
            });
        }
        if self.mode == FirstLink::Fixed && !chain.has_canonical_first_link(1e-9) {
            return Err(TangleError::InvalidInput(
                "first link is not the canonical arc; canonicalize the chain first".into(),
            ));
        }
        let first = Self::first_free_index(self.mode);
        let coords = DVector::from_iterator(
            self.dim(),
            v[first..self.links].iter().flat_map(|x| x.iter().copied()),
        );
        Ok(ClosedState {
            links: self.links,
            mode: self.mode,
            coords,
        })
    }

    /// Rebuilds `V_0..V_n` from a state, with `V_n = V_0`.
    pub fn chain_from_coords(&self, v: &DVector<f64>) -> TangentChain {
        let mut vecs: Vec<Vec3> = (0..self.links).map(|i| self.vector(v, i)).collect();
        vecs.push(vecs[0]);
        TangentChain::from_vectors_unchecked(vecs)
    }
}

/// Point of the closed-tangle constraint set (or any point of `R^p`).
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedState {
    links: usize,
    mode: FirstLink,
    coords: DVector<f64>,
}

impl ClosedState {
    pub fn new(links: usize, mode: FirstLink, coords: DVector<f64>) -> Result<Self> {
        let sys = ConstraintSystem::new(links, mode)?;
        sys.check(&coords)?;
        Ok(Self {
            links,
            mode,
            coords,
        })
    }

    /// Builds a state from a closed chain; in fixed mode the chain is first
    /// rotated so its first link is canonical.
    pub fn from_chain(chain: &TangentChain, mode: FirstLink) -> Result<Self> {
        let chain = match mode {
            FirstLink::Fixed => chain.canonicalized()?,
            FirstLink::Free => chain.clone(),
        };
        ConstraintSystem::new(chain.links(), mode)?.state_from_chain(&chain)
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn mode(&self) -> FirstLink {
        self.mode
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn system(&self) -> ConstraintSystem {
        ConstraintSystem::new(self.links, self.mode).expect("validated at construction")
    }

    pub fn with_coords(&self, coords: DVector<f64>) -> Result<Self> {
        Self::new(self.links, self.mode, coords)
    }

    pub fn to_chain(&self) -> TangentChain {
        self.system().chain_from_coords(&self.coords)
    }
}

/// The `q` constant Hessians of the constraint map.
#[derive(Clone, Debug)]
pub struct HessianStack {
    pub matrices: Vec<DMatrix<f64>>,
}

impl HessianStack {
    /// `(aᵀ HF_k b)_k`.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.matrices.len(),
            self.matrices.iter().map(|h| a.dot(&(h * b))),
        )
    }
}

pub fn constraint_f(state: &ClosedState) -> DVector<f64> {
    state
        .system()
        .residuals(&state.coords)
        .expect("state length validated")
}

pub fn jacobian_jf(state: &ClosedState) -> DMatrix<f64> {
    state
        .system()
        .jacobian(&state.coords)
        .expect("state length validated")
}

pub fn hessians_hf(state: &ClosedState) -> HessianStack {
    state.system().hessians()
}

pub fn project_tangent(state: &ClosedState, r: &DVector<f64>) -> Result<DVector<f64>> {
    state.system().project_tangent(&state.coords, r)
}

pub fn numerical_rank(state: &ClosedState, rel_tol: f64) -> usize {
    state
        .system()
        .numerical_rank(&state.coords, rel_tol)
        .expect("state length validated")
}

pub fn is_on_manifold(state: &ClosedState, tol: f64) -> bool {
    constraint_f(state).amax() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(chain: TangentChain) -> ClosedState {
        ClosedState::from_chain(&chain, FirstLink::Fixed).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(len, |_, _| rng.random_range(-scale..scale))
    }

    fn fd_jacobian(sys: &ConstraintSystem, v: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(sys.num_constraints(), sys.dim());
        for k in 0..sys.dim() {
            let mut plus = v.clone();
            let mut minus = v.clone();
            plus[k] += h;
            minus[k] -= h;
            let col = (sys.residuals(&plus).unwrap() - sys.residuals(&minus).unwrap()) / (2.0 * h);
            jac.set_column(k, &col);
        }
        jac
    }

    #[test]
    fn dimensions() {
        let sys = ConstraintSystem::new(8, FirstLink::Fixed).unwrap();
        assert_eq!((sys.dim(), sys.num_constraints()), (18, 16));
        let sys = ConstraintSystem::new(8, FirstLink::Free).unwrap();
        assert_eq!((sys.dim(), sys.num_constraints()), (24, 19));
        assert!(ConstraintSystem::new(3, FirstLink::Fixed).is_err());
    }

    #[test]
    fn catalog_states_are_on_manifold() {
        let circle = state(catalog::circle4());
        assert_eq!(circle.coords().as_slice(), &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(constraint_f(&circle), DVector::zeros(8));
        assert!(is_on_manifold(&circle, 1e-12));
        let doubled = state(catalog::doubled_circle8());
        assert_eq!(constraint_f(&doubled), DVector::zeros(16));
        assert!(is_on_manifold(&doubled, 1e-12));
        for chain in [
            catalog::six_link_a(),
            catalog::six_link_b(),
            catalog::regular8(),
        ] {
            assert!(is_on_manifold(&state(chain), 0.0));
        }
    }

    #[test]
    fn perturbed_circle_residuals() {
        let circle = state(catalog::circle4());
        let mut c = circle.coords().clone();
        c[1] = -1.1;
        let f = constraint_f(&circle.with_coords(c).unwrap());
        // rows: <V1,V2>, <V2,V3>, <V0,V3>, |V2|²-1, |V3|²-1, closure x/y/z
        assert_abs_diff_eq!(f[3], 0.21, epsilon = 1e-14);
        assert_abs_diff_eq!(f[6], -0.1, epsilon = 1e-14);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[7], 0.0);

        let mut c = circle.coords().clone();
        c[0] += 0.01;
        let perturbed = circle.with_coords(c).unwrap();
        assert!(!is_on_manifold(&perturbed, 1e-6));
    }

    #[test]
    fn jacobian_structure() {
        let s = state(catalog::regular8());
        let sys = s.system();
        let jac = jacobian_jf(&s);
        let v = s.coords();
        // |V_2|² - 1 is row (n-2) + 1 = 7; V_2 occupies columns 0..3
        let row = jac.row(7);
        for k in 0..18 {
            let expected = if k < 3 { 2.0 * v[k] } else { 0.0 };
            assert_eq!(row[k], expected);
        }
        let other = random_vec(&mut ChaCha8Rng::seed_from_u64(1), 18, 1.0);
        let jac_other = sys.jacobian(&other).unwrap();
        for row in 13..16 {
            assert_eq!(jac.row(row), jac_other.row(row));
            for k in 0..18 {
                assert_eq!(jac[(row, k)], if k % 3 == row - 13 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [FirstLink::Fixed, FirstLink::Free] {
            let sys = ConstraintSystem::new(8, mode).unwrap();
            let v = random_vec(&mut rng, sys.dim(), 1.0);
            let diff = sys.jacobian(&v).unwrap() - fd_jacobian(&sys, &v, 1e-5);
            assert!(diff.amax() < 1e-6, "{mode:?}: {}", diff.amax());
        }
    }

    #[test]
    fn hessian_structure() {
        let s = state(catalog::doubled_circle8());
        let h = hessians_hf(&s);
        assert_eq!(h.matrices.len(), 16);
        for m in &h.matrices {
            assert_eq!(m, &m.transpose());
        }
        for k in 13..16 {
            assert_eq!(h.matrices[k], DMatrix::zeros(18, 18));
        }
        // ‖V_2‖² - 1
        let mut expected = DMatrix::zeros(18, 18);
        expected.view_mut((0, 0), (3, 3)).fill_with_identity();
        expected *= 2.0;
        assert_eq!(h.matrices[7], expected);
        // <V_1, V_2> is linear because V_1 is fixed
        assert_eq!(h.matrices[0], DMatrix::zeros(18, 18));
    }

    #[test]
    fn second_directional_difference_matches_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sys = ConstraintSystem::new(8, FirstLink::Fixed).unwrap();
        let hs = sys.hessians();
        let v = random_vec(&mut rng, 18, 1.0);
        let d = random_vec(&mut rng, 18, 1.0);
        let h = 1e-3;
        let fd = (sys.residuals(&(&v + &d * h)).unwrap() - sys.residuals(&v).unwrap() * 2.0
            + sys.residuals(&(&v - &d * h)).unwrap())
            / (h * h);
        assert!((fd - hs.contract(&d, &d)).amax() < 1e-6);
        let e = random_vec(&mut rng, 18, 1.0);
        assert!((sys.second_derivative(&d, &e) - hs.contract(&d, &e)).amax() < 1e-12);
    }

    #[test]
    fn hessian_action_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mode in [FirstLink::Fixed, FirstLink::Free] {
            let sys = ConstraintSystem::new(6, mode).unwrap();
            let hs = sys.hessians();
            let mu = random_vec(&mut rng, sys.num_constraints(), 1.0);
            let x = random_vec(&mut rng, sys.dim(), 1.0);
            let dense = hs
                .matrices
                .iter()
                .zip(mu.iter())
                .fold(DVector::zeros(sys.dim()), |acc, (h, m)| acc + h * &x * *m);
            assert!((sys.hessian_action(&mu, &x) - dense).amax() < 1e-13);
        }
    }

    #[test]
    fn gauss_newton_returns_to_manifold() {
        let s = state(catalog::regular8());
        let sys = s.system();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = s.coords() + random_vec(&mut rng, 18, 0.02);
        let p = sys.project_to_manifold(&v, 1e-12, 20).unwrap();
        assert!(sys.residuals(&p).unwrap().amax() <= 1e-12);
        assert!((&p - s.coords()).amax() < 0.1);
    }

    #[test]
    fn constraint_map_is_exactly_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for mode in [FirstLink::Fixed, FirstLink::Free] {
            let sys = ConstraintSystem::new(7, mode).unwrap();
            let hs = sys.hessians();
            for _ in 0..20 {
                let v = random_vec(&mut rng, sys.dim(), 1.0);
                let h = random_vec(&mut rng, sys.dim(), 0.5);
                let lhs = sys.residuals(&(&v + &h)).unwrap();
                let rhs = sys.residuals(&v).unwrap()
                    + sys.jacobian(&v).unwrap() * &h
                    + hs.contract(&h, &h) * 0.5;
                assert!((lhs - rhs).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = state(catalog::six_link_a());
        let jac = jacobian_jf(&s);
        let r = random_vec(&mut rng, 12, 1.0);
        let p = project_tangent(&s, &r).unwrap();
        assert!((&jac * &p).amax() < 1e-9);
        let pp = project_tangent(&s, &p).unwrap();
        assert!((&pp - &p).amax() < 1e-10);
        // symmetric operator
        let cols: Vec<DVector<f64>> = (0..12)
            .map(|k| {
                project_tangent(&s, &DVector::from_fn(12, |i, _| (i == k) as u8 as f64)).unwrap()
            })
            .collect();
        let pm = DMatrix::from_columns(&cols);
        assert!((&pm - pm.transpose()).amax() < 1e-10);
    }

    #[test]
    fn counterexample_ranks() {
        assert_eq!(numerical_rank(&state(catalog::six_link_a()), 1e-8), 11);
        assert_eq!(numerical_rank(&state(catalog::six_link_b()), 1e-8), 12);
        assert_eq!(numerical_rank(&state(catalog::regular8()), 1e-8), 16);
    }

    #[test]
    fn chain_round_trip() {
        let chain = catalog::regular8();
        let s = state(chain.clone());
        assert_eq!(s.to_chain(), chain);
        let free = ClosedState::from_chain(&chain, FirstLink::Free).unwrap();
        assert_eq!(free.coords().len(), 24);
        assert_eq!(free.to_chain(), chain);
        assert!(is_on_manifold(&free, 0.0));
    }

    #[test]
    fn fixed_mode_canonicalizes_rotated_chains() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let rotated = catalog::six_link_b().rotated(&r);
        let s = ClosedState::from_chain(&rotated, FirstLink::Fixed).unwrap();
        let expected = state(catalog::six_link_b());
        assert!((s.coords() - expected.coords()).amax() < 1e-14);
        let sys = ConstraintSystem::new(6, FirstLink::Fixed).unwrap();
        assert!(sys.state_from_chain(&rotated).is_err());
    }
}
