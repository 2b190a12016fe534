//! Truncated singular value decompositions, Moore–Penrose pseudo-inverses
//! and numerical rank.

use nalgebra::{DMatrix, DVector};

/// Relative cut-off below which singular values count as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// Compact SVD `M = U_r Σ_r V_rᵀ` keeping singular values above
/// `rel_tol · σ_max`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    all_singular_values: Vec<f64>,
}

impl TruncatedSvd {
    pub fn new(m: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Self {
                u: DMatrix::zeros(rows, 0),
                sigma: DVector::zeros(0),
                v: DMatrix::zeros(cols, 0),
                all_singular_values: Vec::new(),
            };
        }
        let svd = m.clone().svd(true, true);
        let u_full = svd.u.expect("requested U");
        let vt_full = svd.v_t.expect("requested Vᵀ");
        let s = svd.singular_values;
        let s_max = s.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..s.len())
            .filter(|&i| s_max > 0.0 && s[i] > rel_tol * s_max)
            .collect();
        let r = keep.len();
        let mut u = DMatrix::zeros(rows, r);
        let mut v = DMatrix::zeros(cols, r);
        let mut sigma = DVector::zeros(r);
        for (j, &i) in keep.iter().enumerate() {
            u.set_column(j, &u_full.column(i));
            v.set_column(j, &vt_full.row(i).transpose());
            sigma[j] = s[i];
        }
        let mut all: Vec<f64> = s.iter().cloned().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        Self {
            u,
            sigma,
            v,
            all_singular_values: all,
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// All singular values, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.all_singular_values
    }

    /// `M† = V_r Σ_r⁻¹ U_rᵀ`.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let mut vs = self.v.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            vs.column_mut(j).unscale_mut(*s);
        }
        vs * self.u.transpose()
    }

    /// `M† b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let c = self.u.tr_mul(b).component_div(&self.sigma);
        &self.v * c
    }

    /// `(Mᵀ)† x = U_r Σ_r⁻¹ V_rᵀ x`.
    pub fn solve_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        let c = self.v.tr_mul(x).component_div(&self.sigma);
        &self.u * c
    }

    /// `(M Mᵀ)† b = U_r Σ_r⁻² U_rᵀ b`.
    pub fn solve_gram(&self, b: &DVector<f64>) -> DVector<f64> {
        let s2 = self.sigma.component_mul(&self.sigma);
        let c = self.u.tr_mul(b).component_div(&s2);
        &self.u * c
    }

    /// `(I - M†M) x`, the orthogonal projection onto `ker M`.
    pub fn project_kernel(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.v * self.v.tr_mul(x)
    }

    /// Orthonormal basis of `ker M` as columns (dimension `cols - rank`).
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        let cols = self.v.nrows();
        let projector = DMatrix::identity(cols, cols) - &self.v * self.v.transpose();
        // the projector has eigenvalues 0/1; its eigenvectors at 1 span the kernel
        let eig = projector.symmetric_eigen();
        let idx: Vec<usize> = (0..cols).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let mut basis = DMatrix::zeros(cols, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            basis.set_column(j, &eig.eigenvectors.column(i));
        }
        basis
    }
}

/// Moore–Penrose pseudo-inverse, truncating singular values below
/// `rel_tol · σ_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    TruncatedSvd::new(m, rel_tol).pseudo_inverse()
}

/// Count of singular values above `rel_tol · σ_max`.
pub fn matrix_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    TruncatedSvd::new(m, rel_tol).rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!(pseudo_inverse(&i, 1e-8), i);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]));
        assert_relative_eq!(pseudo_inverse(&d, 1e-8), expected);
        assert_eq!(matrix_rank(&d, 1e-8), 1);
    }

    #[test]
    fn zero_matrix() {
        let z = DMatrix::<f64>::zeros(3, 5);
        assert_eq!(matrix_rank(&z, 1e-8), 0);
        assert_eq!(pseudo_inverse(&z, 1e-8), DMatrix::zeros(5, 3));
    }

    #[test]
    fn penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
            let p = pseudo_inverse(&m, 1e-8);
            assert!((&m * &p * &m - &m).abs().max() < 1e-10);
            assert!((&p * &m * &p - &p).abs().max() < 1e-10);
            let mp = &m * &p;
            assert!((&mp - mp.transpose()).abs().max() < 1e-10);
        }
        // rank-deficient and rectangular
        let a = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 9, |_, _| rng.random_range(-1.0..1.0));
        let m = a * b;
        assert_eq!(matrix_rank(&m, 1e-8), 3);
        let p = pseudo_inverse(&m, 1e-8);
        assert!((&m * &p * &m - &m).abs().max() < 1e-10);
    }

    #[test]
    fn helper_solves_agree_with_explicit_pinv() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
        let svd = TruncatedSvd::new(&m, 1e-8);
        let p = svd.pseudo_inverse();
        let b = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        assert!((svd.solve(&b) - &p * &b).amax() < 1e-12);
        assert!((svd.solve_transpose(&x) - p.transpose() * &x).amax() < 1e-12);
        let gram = &m * m.transpose();
        assert!((svd.solve_gram(&b) - pseudo_inverse(&gram, 1e-12) * &b).amax() < 1e-10);
        let k = svd.project_kernel(&x);
        assert!((&m * &k).amax() < 1e-12);
        let basis = svd.kernel_basis();
        assert_eq!(basis.ncols(), 3);
        assert!((&m * &basis).amax() < 1e-12);
    }
}
