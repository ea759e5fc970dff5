//! Every completion of a serrated partial covariance, parametrized by one
//! contraction per merge step: the unknown block becomes
//! `K⋆[S, D] + U^{1/2} Ψ V^{1/2}` where `U` and `V` are the Schur
//! complements of `K_S` and `K_D` with respect to the separator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{propagate, separator_eigen, write_block, CompletionResult, PartialCovariance};
use crate::domain::SerratedDomain;
use crate::error::{Error, Result};
use crate::linalg::{gram, op_norm, psd_sqrt_from, sym_eigen, Cutoff, SymMatrix, EXACT_REL_TOL};

const CONTRACTION_SLACK: f64 = 1e-10;

/// One `|S_p| × |D_p|` contraction per merge step `p = 1..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSet {
    psis: Vec<DMatrix<f64>>,
}

impl ContractionSet {
    pub fn new(domain: &SerratedDomain, psis: Vec<DMatrix<f64>>) -> Result<Self> {
        let regions = domain.all_regions();
        if psis.len() != regions.len() {
            return Err(Error::Shape(format!(
                "expected {} contractions, got {}",
                regions.len(),
                psis.len()
            )));
        }
        for (r, psi) in regions.iter().zip(&psis) {
            if psi.nrows() != r.s.len() || psi.ncols() != r.d.len() {
                return Err(Error::Shape(format!(
                    "contraction for step {} must be {}x{}, got {}x{}",
                    r.p,
                    r.s.len(),
                    r.d.len(),
                    psi.nrows(),
                    psi.ncols()
                )));
            }
            let norm = op_norm(psi);
            if norm > 1.0 + CONTRACTION_SLACK {
                return Err(Error::InvalidContraction(norm));
            }
        }
        Ok(ContractionSet { psis })
    }

    pub fn zeros(domain: &SerratedDomain) -> Self {
        let psis = domain
            .all_regions()
            .iter()
            .map(|r| DMatrix::zeros(r.s.len(), r.d.len()))
            .collect();
        ContractionSet { psis }
    }

    /// Random contractions of operator norm exactly `norm` at every step.
    pub fn random(domain: &SerratedDomain, norm: f64, seed: u64) -> Result<Self> {
        check_norm(norm)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psis = domain
            .all_regions()
            .iter()
            .map(|r| random_contraction_with(&mut rng, r.s.len(), r.d.len(), norm))
            .collect();
        Ok(ContractionSet { psis })
    }

    pub fn psis(&self) -> &[DMatrix<f64>] {
        &self.psis
    }
}

fn check_norm(norm: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&norm) {
        return Err(Error::InvalidContraction(norm));
    }
    Ok(())
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn random_contraction_with(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    norm: f64,
) -> DMatrix<f64> {
    let k = rows.min(cols);
    if k == 0 || norm == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let left = orthonormal_columns(rng, rows, k);
    let right = orthonormal_columns(rng, cols, k);
    let mut sigma: Vec<f64> = (0..k).map(|_| norm * rng.random::<f64>()).collect();
    sigma[0] = norm;
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(sigma));
    left * sigma * right.transpose()
}

/// Random `rows × cols` matrix with operator norm `norm`, deterministic in
/// `seed`.
pub fn random_contraction(rows: usize, cols: usize, norm: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_norm(norm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_contraction_with(&mut rng, rows, cols, norm))
}

/// The completion selected by `psis`. Steps run in ascending order; once a
/// step is perturbed, later steps see the perturbed cross-covariances.
pub fn perturbed_completion(
    canonical: &CompletionResult,
    pc: &PartialCovariance,
    psis: &ContractionSet,
) -> Result<SymMatrix> {
    let domain = pc.domain();
    let regions = domain.all_regions();
    if psis.psis.len() != regions.len() {
        return Err(Error::Shape(format!(
            "expected {} contractions, got {}",
            regions.len(),
            psis.psis.len()
        )));
    }
    if canonical.kernel.dim() != domain.grid().n() {
        return Err(Error::Shape(
            "canonical kernel does not match the domain grid".into(),
        ));
    }
    for psi in &psis.psis {
        let norm = op_norm(psi);
        if norm > 1.0 + CONTRACTION_SLACK {
            return Err(Error::InvalidContraction(norm));
        }
    }

    let mut k = canonical.kernel.as_matrix().clone();
    let mut touched = false;
    for (r, psi) in regions.iter().zip(&psis.psis) {
        let zero = psi.iter().all(|&x| x == 0.0);
        if zero && !touched {
            continue;
        }
        let eig = separator_eigen(&k, &r.j)?;
        let rank = if eig.leading() > 0.0 {
            eig.retained(Cutoff::RelTol(EXACT_REL_TOL))
        } else {
            0
        };
        let mut block = propagate(&k, &r.s, &r.j, &r.d, &eig, rank);
        if !zero {
            let u = residual(&k, &r.s, &r.j, &eig, rank)?;
            let v = residual(&k, &r.d, &r.j, &eig, rank)?;
            let u_half = psd_sqrt_from(&sym_eigen(&u)?)?;
            let v_half = psd_sqrt_from(&sym_eigen(&v)?)?;
            block += u_half.as_matrix() * psi * v_half.as_matrix();
        }
        write_block(&mut k, &r.s, &r.d, &block);
        touched = true;
    }
    Ok(SymMatrix::from_symmetric(k))
}

/// `K_A − K[A, J] pinv(K_J) K[J, A]` for a contiguous block `A`.
fn residual(
    k: &DMatrix<f64>,
    a: &std::ops::Range<usize>,
    j: &std::ops::Range<usize>,
    eig: &crate::linalg::EigenDecomposition,
    rank: usize,
) -> Result<SymMatrix> {
    let own = k.view((a.start, a.start), (a.len(), a.len())).into_owned();
    if rank == 0 {
        return SymMatrix::new(own);
    }
    let x = k.view((a.start, j.start), (a.len(), j.len())) * eig.whitener(rank);
    SymMatrix::new(own - gram(&x).into_matrix())
}

/// Applies the integral operator of `k` to `f` through its block pieces:
/// the observed squares, the unknown blocks `R_p` and their adjoints, minus
/// the separators counted twice.
pub fn assemble_block_operator(
    k: &SymMatrix,
    domain: &SerratedDomain,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = domain.grid().n();
    if k.dim() != n || f.len() != n {
        return Err(Error::Shape(format!(
            "kernel {}x{} and vector {} must match the grid of {n} nodes",
            k.dim(),
            k.dim(),
            f.len()
        )));
    }
    let kk = k.as_matrix();
    let mut out = DVector::zeros(n);
    for iv in domain.intervals() {
        let r = iv.range();
        let part = kk.view((r.start, r.start), (r.len(), r.len())) * f.rows(r.start, r.len());
        {
            let mut v = out.rows_mut(r.start, r.len());
            v += &part;
        }
    }
    for reg in domain.all_regions() {
        let (s, d, j) = (&reg.s, &reg.d, &reg.j);
        let rp = kk.view((s.start, d.start), (s.len(), d.len()));
        let on_s = rp * f.rows(d.start, d.len());
        {
            let mut v = out.rows_mut(s.start, s.len());
            v += &on_s;
        }
        let on_d = rp.transpose() * f.rows(s.start, s.len());
        {
            let mut v = out.rows_mut(d.start, d.len());
            v += &on_d;
        }
        let jp = kk.view((j.start, j.start), (j.len(), j.len())) * f.rows(j.start, j.len());
        {
            let mut v = out.rows_mut(j.start, j.len());
            v -= &jp;
        }
    }
    Ok(out * domain.grid().weight())
}
