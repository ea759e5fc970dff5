//! Dense symmetric spectral routines: eigendecomposition, truncated
//! pseudo-inverses, PSD square roots, Schur complements and norms.
//!
//! Inner products in the reproducing kernel Hilbert space of a block `K_J`
//! are realized as `fᵀ pinv(K_J) g` on plain grid values. The quadrature
//! weight cancels from every such expression, so none of the routines here
//! take a grid except the norms.

use std::ops::{Index, Range};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::domain::Grid;
use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used for exact-input pseudo-inverses.
pub const EXACT_REL_TOL: f64 = 1e-10;

/// Square matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` by averaging it with its transpose.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a matrix the caller has already made exactly symmetric.
    pub(crate) fn from_symmetric(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        debug_assert!((0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)])));
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Principal submatrix on an arbitrary index list.
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(self.0.select_rows(idx).select_columns(idx))
    }

    /// Principal submatrix on a contiguous index range.
    pub fn principal_range(&self, r: Range<usize>) -> SymMatrix {
        let len = r.len();
        SymMatrix(self.0.view((r.start, r.start), (len, len)).into_owned())
    }

    /// Off-diagonal rectangular block `rows × cols`.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> DMatrix<f64> {
        self.0
            .view((rows.start, cols.start), (rows.len(), cols.len()))
            .into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl From<SymMatrix> for DMatrix<f64> {
    fn from(m: SymMatrix) -> Self {
        m.0
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn source_dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn leading(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Number of eigenpairs retained by `cutoff`. Non-positive eigenvalues
    /// are never retained.
    pub fn retained(&self, cutoff: Cutoff) -> usize {
        let positive = self.eigenvalues.iter().take_while(|&&l| l > 0.0).count();
        match cutoff {
            Cutoff::Rank(r) => r.min(positive),
            Cutoff::RelTol(tol) => {
                let floor = tol * self.leading();
                self.eigenvalues
                    .iter()
                    .take_while(|&&l| l > floor && l > 0.0)
                    .count()
            }
        }
    }

    /// `V_N diag(λ^{-1/2})` for the first `rank` pairs, so that
    /// `W Wᵀ` is the rank-`rank` pseudo-inverse.
    pub fn whitener(&self, rank: usize) -> DMatrix<f64> {
        let mut w = self.eigenvectors.columns(0, rank).into_owned();
        for (k, mut col) in w.column_iter_mut().enumerate() {
            col /= self.eigenvalues[k].sqrt();
        }
        w
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }
}

/// Truncation of a spectral inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Keep the leading `r` positive eigenpairs.
    Rank(usize),
    /// Keep eigenpairs with `λ_k > tol · λ_1`.
    RelTol(f64),
}

pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(&order);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `Σ_{k ≤ N} v_k v_kᵀ / λ_k` with `N` chosen by `cutoff`.
pub fn truncated_pinv(e: &EigenDecomposition, cutoff: Cutoff) -> Result<SymMatrix> {
    if e.leading() <= 0.0 {
        return Err(Error::DegenerateOperator(e.leading()));
    }
    let w = e.whitener(e.retained(cutoff));
    Ok(gram(&w))
}

/// `X Xᵀ` with exact symmetry.
pub(crate) fn gram(x: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(x * x.transpose()).expect("gram matrix is square")
}

/// Symmetric PSD square root. Eigenvalues slightly below zero from rounding
/// are clipped.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let e = sym_eigen(a)?;
    psd_sqrt_from(&e)
}

pub(crate) fn psd_sqrt_from(e: &EigenDecomposition) -> Result<SymMatrix> {
    let tol = 1e-8 * (1.0 + e.leading().max(0.0));
    if e.smallest() < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: e.smallest(),
        });
    }
    let mut w = e.eigenvectors.clone();
    for (k, mut col) in w.column_iter_mut().enumerate() {
        col *= e.eigenvalues[k].max(0.0).sqrt().sqrt();
    }
    Ok(gram(&w))
}

/// Schur complement `K_B / K_A` on the index set `B \ A`, in the order those
/// indices appear in `b_idx`.
pub fn schur_complement(
    k: &SymMatrix,
    b_idx: &[usize],
    a_idx: &[usize],
    rel_tol: f64,
) -> Result<SymMatrix> {
    if let Some(&bad) = a_idx.iter().find(|i| !b_idx.contains(i)) {
        return Err(Error::InvalidInput(format!(
            "index {bad} of A is not contained in B"
        )));
    }
    if let Some(&bad) = b_idx.iter().find(|&&i| i >= k.dim()) {
        return Err(Error::Index {
            index: bad,
            valid: format!("0..{}", k.dim()),
        });
    }
    let rest: Vec<usize> = b_idx
        .iter()
        .copied()
        .filter(|i| !a_idx.contains(i))
        .collect();
    let k_rest = k.principal(&rest);
    if rest.is_empty() || a_idx.is_empty() {
        return Ok(k_rest);
    }
    let e = sym_eigen(&k.principal(a_idx))?;
    if e.leading() <= 0.0 {
        return Ok(k_rest);
    }
    let w = e.whitener(e.retained(Cutoff::RelTol(rel_tol)));
    let cross = k.as_matrix().select_rows(&rest).select_columns(a_idx);
    let x = cross * w;
    SymMatrix::new(k_rest.into_matrix() - &x * x.transpose())
}

/// Result of [`psd_certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCertificate {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

/// PSD test relative to the leading eigenvalue: `λ_min ≥ -tol (1 + λ_1)`.
pub fn psd_certify(a: &SymMatrix, tol: f64) -> PsdCertificate {
    if a.dim() == 0 {
        return PsdCertificate {
            is_psd: true,
            min_eigenvalue: 0.0,
        };
    }
    if !a.is_finite() {
        return PsdCertificate {
            is_psd: false,
            min_eigenvalue: f64::NAN,
        };
    }
    let ev = a.as_matrix().clone().symmetric_eigenvalues();
    let min = ev.min();
    let max = ev.max();
    PsdCertificate {
        is_psd: min >= -tol * (1.0 + max.max(0.0)),
        min_eigenvalue: min,
    }
}

/// Hilbert–Schmidt norm of the integral operator with kernel values `a` on
/// `grid`: `w · ‖A‖_F` with `w` the quadrature weight.
pub fn hs_norm(a: &DMatrix<f64>, grid: &Grid) -> f64 {
    grid.weight() * a.norm()
}

/// Largest singular value.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.amax()
    }

    fn random_gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_psd(n: usize, seed: u64) -> SymMatrix {
        let c = random_gaussian(n + 3, n, seed);
        gram(&(c.transpose() / ((n + 3) as f64).sqrt()))
    }

    #[test]
    fn eigen_identity_and_2x2() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let e = sym_eigen(&a).unwrap();
        // roots of (2 - x)^2 - 1
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        let a = SymMatrix(m);
        assert!(matches!(sym_eigen(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn eigen_reconstruction_20x20() {
        let g = random_gaussian(20, 20, 7);
        let a = SymMatrix::new(&g + g.transpose()).unwrap();
        let e = sym_eigen(&a).unwrap();
        let v = &e.eigenvectors;
        let orth = v.transpose() * v - DMatrix::identity(20, 20);
        assert!(max_abs(&orth) <= 1e-10);
        let err = max_abs(&(e.reconstruct() - a.as_matrix()));
        assert!(err <= 1e-8 * (1.0 + a.max_abs()));
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_examples() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(
            truncated_pinv(&e, Cutoff::Rank(3)).unwrap(),
            SymMatrix::identity(3)
        );

        let e = sym_eigen(&SymMatrix::from_diagonal(&[4.0, 1.0])).unwrap();
        let p = truncated_pinv(&e, Cutoff::Rank(1)).unwrap();
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15 && p[(1, 1)].abs() < 1e-15);

        let e = sym_eigen(&SymMatrix::from_diagonal(&[1.0, 1e-14])).unwrap();
        let p = truncated_pinv(&e, Cutoff::RelTol(1e-8)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15 && p[(1, 1)].abs() < 1e-15);

        let e = sym_eigen(&SymMatrix::from_diagonal(&[2.0, -1.0])).unwrap();
        let p = truncated_pinv(&e, Cutoff::Rank(2)).unwrap();
        assert_eq!(p[(1, 1)], 0.0);

        let e = sym_eigen(&SymMatrix::zeros(2)).unwrap();
        assert!(matches!(
            truncated_pinv(&e, Cutoff::Rank(1)),
            Err(Error::DegenerateOperator(_))
        ));
    }

    #[test]
    fn sqrt_examples() {
        assert!(
            max_abs(
                &(psd_sqrt(&SymMatrix::identity(4)).unwrap().into_matrix()
                    - DMatrix::identity(4, 4))
            ) < 1e-14
        );
        let r = psd_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
        match psd_sqrt(&SymMatrix::from_diagonal(&[1.0, -0.5])) {
            Err(Error::NotPsd { min_eigenvalue }) => assert_eq!(min_eigenvalue, -0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let b = random_psd(10, 3);
        let r = psd_sqrt(&b).unwrap();
        let sq = r.as_matrix() * r.as_matrix();
        assert!(max_abs(&(sq - b.as_matrix())) <= 1e-8);
    }

    #[test]
    fn schur_examples() {
        let k = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
        let s = schur_complement(&k, &[0, 1], &[1], EXACT_REL_TOL).unwrap();
        assert_eq!(s.dim(), 1);
        // a - b^2 / c
        assert!((s[(0, 0)] - (1.0 - 0.25 / 2.0)).abs() < 1e-14);

        let s = schur_complement(&k, &[0, 1], &[0, 1], EXACT_REL_TOL).unwrap();
        assert_eq!(s.dim(), 0);

        let z = SymMatrix::zeros(3);
        let s = schur_complement(&z, &[0, 1, 2], &[2], EXACT_REL_TOL).unwrap();
        assert_eq!(s, SymMatrix::zeros(2));
    }

    #[test]
    fn schur_brownian_conditional_variance() {
        let g = Grid::new(21).unwrap();
        let k = SymMatrix::from_fn(21, |i, j| g.node(i).min(g.node(j)));
        let all: Vec<usize> = (0..21).collect();
        let a: Vec<usize> = (10..21).collect();
        let s = schur_complement(&k, &all, &a, EXACT_REL_TOL).unwrap();
        // node 5 is t = 0.25; min(s,t) - s t / 0.5
        assert!((s[(5, 5)] - (0.25 - 0.25 * 0.25 / 0.5)).abs() < 1e-10);
        assert!((s[(5, 5)] - 0.125).abs() < 1e-10);
    }

    #[test]
    fn certify_examples() {
        let c = psd_certify(&SymMatrix::identity(3), 1e-8);
        assert!(c.is_psd && (c.min_eigenvalue - 1.0).abs() < 1e-14);
        let c = psd_certify(&SymMatrix::from_diagonal(&[1.0, -0.5]), 1e-8);
        assert!(!c.is_psd && (c.min_eigenvalue + 0.5).abs() < 1e-14);
        assert!(psd_certify(&random_psd(12, 9), 1e-8).is_psd);
    }

    #[test]
    fn norm_examples() {
        let g = Grid::new(8).unwrap();
        assert_eq!(hs_norm(&DMatrix::zeros(8, 8), &g), 0.0);
        // sqrt of n^2 ones
        let ones = DMatrix::from_element(8, 8, 1.0);
        assert!((hs_norm(&ones, &g) - g.weight() * 8.0).abs() < 1e-14);
        assert!((op_norm(&DMatrix::identity(5, 5)) - 1.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn schur_preserves_psd(seed in any::<u64>(), n in 3usize..12, split in 1usize..3) {
            let k = random_psd(n, seed);
            let all: Vec<usize> = (0..n).collect();
            let a: Vec<usize> = (0..n).filter(|i| i % (split + 1) == 0).collect();
            let s = schur_complement(&k, &all, &a, EXACT_REL_TOL).unwrap();
            let c = psd_certify(&s, 0.0);
            prop_assert!(c.min_eigenvalue >= -1e-8 * (1.0 + k.max_abs()));
        }

        #[test]
        fn pinv_consistency(seed in any::<u64>(), n in 2usize..10) {
            let a = random_psd(n, seed);
            let e = sym_eigen(&a).unwrap();
            let p = truncated_pinv(&e, Cutoff::Rank(n)).unwrap();
            let pap = p.as_matrix() * a.as_matrix() * p.as_matrix();
            prop_assert!(max_abs(&(pap - p.as_matrix())) <= 1e-8);
        }

        #[test]
        fn sqrt_roundtrip(seed in any::<u64>(), n in 1usize..10) {
            let a = random_psd(n, seed);
            let r = psd_sqrt(&a).unwrap();
            prop_assert!(max_abs(&(r.as_matrix() * r.as_matrix() - a.as_matrix())) <= 1e-8);
        }
    }
}
