//! Canonical completion of partial covariances on serrated domains.
//!
//! The unknown block between two overlapping squares is filled by
//! propagating cross-covariances through the separator:
//! `K[S, D] = K[S, J] · pinv(K_J) · K[J, D]`. Repeating this over the
//! separators of an `m`-interval cover, in any order, fills the square.

mod characterization;
mod uniqueness;

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::SerratedDomain;
use crate::error::{Error, Result};
use crate::linalg::{psd_certify, sym_eigen, Cutoff, EigenDecomposition, SymMatrix, EXACT_REL_TOL};

pub use characterization::{
    assemble_block_operator, perturbed_completion, random_contraction, ContractionSet,
};
pub use uniqueness::{uniqueness_check, UniquenessReport, DEFAULT_UNIQUENESS_TOL};

/// Tolerance for the PSD check on each observed square.
pub const BLOCK_PSD_TOL: f64 = 1e-8;

/// Covariance values observed on a serrated domain.
#[derive(Debug, Clone)]
pub struct PartialCovariance {
    domain: SerratedDomain,
    values: SymMatrix,
    mask: DMatrix<bool>,
}

impl PartialCovariance {
    /// Entries outside the domain are discarded (set to zero).
    pub fn new(domain: SerratedDomain, values: SymMatrix) -> Result<Self> {
        let n = domain.grid().n();
        if values.dim() != n {
            return Err(Error::Shape(format!(
                "matrix has dimension {} but the domain grid has {n} nodes",
                values.dim()
            )));
        }
        let mask = domain.mask();
        let mut kept = values.into_matrix();
        for (v, &inside) in kept.iter_mut().zip(mask.iter()) {
            if !inside {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite observed entry".into()));
            }
        }
        let values = SymMatrix::from_symmetric(kept);
        for (k, iv) in domain.intervals().iter().enumerate() {
            let cert = psd_certify(&values.principal_range(iv.range()), BLOCK_PSD_TOL);
            if !cert.is_psd {
                return Err(Error::InvalidInput(format!(
                    "block on interval {} is not positive semidefinite (min eigenvalue {:e})",
                    k + 1,
                    cert.min_eigenvalue
                )));
            }
        }
        Ok(PartialCovariance {
            domain,
            values,
            mask,
        })
    }

    /// Restriction of a full kernel to `domain`.
    pub fn restrict(kernel: &SymMatrix, domain: &SerratedDomain) -> Result<Self> {
        Self::new(domain.clone(), kernel.clone())
    }

    pub fn domain(&self) -> &SerratedDomain {
        &self.domain
    }

    pub fn values(&self) -> &SymMatrix {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }
}

/// Order in which separators are merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeOrder {
    Ascending,
    Descending,
    /// A permutation of the separator indices `1..m`.
    Explicit(Vec<usize>),
}

impl MergeOrder {
    pub fn separators(&self, m: usize) -> Result<Vec<usize>> {
        let steps = m.saturating_sub(1);
        match self {
            MergeOrder::Ascending => Ok((1..=steps).collect()),
            MergeOrder::Descending => Ok((1..=steps).rev().collect()),
            MergeOrder::Explicit(seq) => {
                let mut sorted = seq.clone();
                sorted.sort_unstable();
                if sorted != (1..=steps).collect::<Vec<_>>() {
                    return Err(Error::InvalidInput(format!(
                        "merge order {seq:?} is not a permutation of 1..={steps}"
                    )));
                }
                Ok(seq.clone())
            }
        }
    }
}

/// Diagnostics for one merge step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub p: usize,
    pub rank_used: usize,
    /// Smallest eigenvalue of the separator block `K_{J_p}`.
    pub lambda_min_j: f64,
    /// Smallest eigenvalue retained in the pseudo-inverse.
    pub lambda_cutoff: f64,
    pub separation_residual_max: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub kernel: SymMatrix,
    /// Step records in execution order.
    pub per_step: Vec<StepRecord>,
    pub order: Vec<usize>,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    order: &'a [usize],
    per_step: &'a [StepRecord],
    min_eigenvalue: f64,
    warnings: &'a [String],
}

impl CompletionResult {
    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::to_value(Diagnostics {
            order: &self.order,
            per_step: &self.per_step,
            min_eigenvalue: self.min_eigenvalue,
            warnings: &self.warnings,
        })
        .expect("diagnostics serialize")
    }
}

/// Outcome of filling one unknown block.
pub(crate) struct Fill {
    pub rank: usize,
    pub lambda_min: f64,
    pub lambda_cutoff: f64,
    pub degenerate: bool,
}

pub(crate) fn separator_eigen(k: &DMatrix<f64>, j: &Range<usize>) -> Result<EigenDecomposition> {
    let block = k.view((j.start, j.start), (j.len(), j.len())).into_owned();
    sym_eigen(&SymMatrix::new(block)?)
}

/// `K[S, J] · W · Wᵀ · K[J, D]` with `W` the rank-`rank` whitener of `K_J`.
pub(crate) fn propagate(
    k: &DMatrix<f64>,
    s: &Range<usize>,
    j: &Range<usize>,
    d: &Range<usize>,
    eig: &EigenDecomposition,
    rank: usize,
) -> DMatrix<f64> {
    if rank == 0 {
        return DMatrix::zeros(s.len(), d.len());
    }
    let w = eig.whitener(rank);
    let left = k.view((s.start, j.start), (s.len(), j.len())) * &w;
    let right = k.view((d.start, j.start), (d.len(), j.len())) * &w;
    left * right.transpose()
}

pub(crate) fn write_block(
    k: &mut DMatrix<f64>,
    s: &Range<usize>,
    d: &Range<usize>,
    block: &DMatrix<f64>,
) {
    k.view_mut((s.start, d.start), (s.len(), d.len()))
        .copy_from(block);
    k.view_mut((d.start, s.start), (d.len(), s.len()))
        .copy_from(&block.transpose());
}

/// Fills `S × D` (and its mirror) through separator `J`, pseudo-inverse
/// truncated at `rank`.
pub(crate) fn fill_with_rank(
    k: &mut DMatrix<f64>,
    s: &Range<usize>,
    j: &Range<usize>,
    d: &Range<usize>,
    eig: &EigenDecomposition,
    rank: usize,
) -> Fill {
    let degenerate = eig.leading() <= 0.0;
    let rank = if degenerate { 0 } else { rank };
    let block = propagate(k, s, j, d, eig, rank);
    write_block(k, s, d, &block);
    Fill {
        rank,
        lambda_min: eig.smallest(),
        lambda_cutoff: if rank > 0 {
            eig.eigenvalues[rank - 1]
        } else {
            0.0
        },
        degenerate,
    }
}

fn degenerate_warning(p: usize) -> String {
    format!("degenerate separator at step {p}: K_J is identically zero, unknown block set to zero")
}

/// Canonical completion by successive two-square completions.
pub fn canonical_completion(
    pc: &PartialCovariance,
    order: &MergeOrder,
) -> Result<CompletionResult> {
    let domain = pc.domain();
    let ivs = domain.intervals();
    let seq = order.separators(domain.m())?;
    let mut k = pc.values().as_matrix().clone();

    // blocks of consecutive intervals already merged, as (first, last) interval indices
    let mut blocks: Vec<(usize, usize)> = (0..ivs.len()).map(|i| (i, i)).collect();
    let mut per_step = Vec::with_capacity(seq.len());
    let mut warnings = Vec::new();
    for &p in &seq {
        let left = blocks
            .iter()
            .position(|&(_, last)| last == p - 1)
            .expect("separator joins two current blocks");
        let (first, _) = blocks[left];
        let (_, last) = blocks[left + 1];
        let s = ivs[first].a..ivs[p].a;
        let j = ivs[p].a..ivs[p - 1].b + 1;
        let d = ivs[p - 1].b + 1..ivs[last].b + 1;

        let eig = separator_eigen(&k, &j)?;
        let rank = eig.retained(Cutoff::RelTol(EXACT_REL_TOL));
        let fill = fill_with_rank(&mut k, &s, &j, &d, &eig, rank);
        if fill.degenerate {
            warnings.push(degenerate_warning(p));
        }
        per_step.push(StepRecord {
            p,
            rank_used: fill.rank,
            lambda_min_j: fill.lambda_min,
            lambda_cutoff: fill.lambda_cutoff,
            separation_residual_max: 0.0,
            degenerate: fill.degenerate,
        });
        blocks[left] = (first, last);
        blocks.remove(left + 1);
    }

    finish(k, domain, per_step, seq, warnings)
}

pub(crate) fn finish(
    k: DMatrix<f64>,
    domain: &SerratedDomain,
    mut per_step: Vec<StepRecord>,
    order: Vec<usize>,
    warnings: Vec<String>,
) -> Result<CompletionResult> {
    let kernel = SymMatrix::from_symmetric(k);
    let residuals = verify_separation(&kernel, domain)?;
    for rec in &mut per_step {
        rec.separation_residual_max = residuals[rec.p - 1];
    }
    let min_eigenvalue = psd_certify(&kernel, 0.0).min_eigenvalue;
    Ok(CompletionResult {
        kernel,
        per_step,
        order,
        min_eigenvalue,
        warnings,
    })
}

/// Completion from a cover of at most two intervals.
pub fn complete_2serrated(pc: &PartialCovariance) -> Result<CompletionResult> {
    if pc.domain().m() > 2 {
        return Err(Error::InvalidInput(format!(
            "two-square completion needs at most 2 intervals, domain has {}",
            pc.domain().m()
        )));
    }
    canonical_completion(pc, &MergeOrder::Ascending)
}

/// Largest violation of the separation equation
/// `K(s, t) = k_{s,J}ᵀ pinv(K_J) k_{t,J}` over `S_p × D_p`, per step.
pub fn verify_separation(k: &SymMatrix, domain: &SerratedDomain) -> Result<Vec<f64>> {
    if k.dim() != domain.grid().n() {
        return Err(Error::Shape(format!(
            "kernel has dimension {} but the domain grid has {} nodes",
            k.dim(),
            domain.grid().n()
        )));
    }
    let kk = k.as_matrix();
    domain
        .all_regions()
        .into_iter()
        .map(|r| {
            if r.s.is_empty() || r.d.is_empty() {
                return Ok(0.0);
            }
            let eig = separator_eigen(kk, &r.j)?;
            let rank = if eig.leading() > 0.0 {
                eig.retained(Cutoff::RelTol(EXACT_REL_TOL))
            } else {
                0
            };
            let pred = propagate(kk, &r.s, &r.j, &r.d, &eig, rank);
            let actual = kk.view((r.s.start, r.d.start), (r.s.len(), r.d.len()));
            Ok((actual - pred).amax())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_serrated_domain, Grid};
    use crate::linalg::gram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn brownian(g: &Grid) -> SymMatrix {
        SymMatrix::from_fn(g.n(), |i, j| g.node(i).min(g.node(j)))
    }

    pub(crate) fn random_psd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = n + 5;
        let c = DMatrix::from_fn(n, rows, |_, _| rng.sample::<f64, _>(StandardNormal));
        gram(&(c / (rows as f64).sqrt()))
    }

    fn max_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
        (a.as_matrix() - b.as_matrix()).amax()
    }

    #[test]
    fn brownian_two_squares() {
        let g = Grid::new(31).unwrap();
        let d = make_serrated_domain(g.clone(), &[(0.0, 2.0 / 3.0), (1.0 / 3.0, 1.0)]).unwrap();
        let k = brownian(&g);
        let pc = PartialCovariance::restrict(&k, &d).unwrap();
        let out = complete_2serrated(&pc).unwrap();
        assert!(max_diff(&out.kernel, &k) <= 1e-8);
    }

    #[test]
    fn identical_intervals_are_untouched() {
        let g = Grid::new(7).unwrap();
        let d = make_serrated_domain(g.clone(), &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let k = random_psd(7, 1);
        let pc = PartialCovariance::restrict(&k, &d).unwrap();
        let out = complete_2serrated(&pc).unwrap();
        assert_eq!(out.kernel, k);
        assert!(out.per_step.is_empty());
    }

    #[test]
    fn three_node_scalar() {
        let g = Grid::new(3).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.5, 1.0)]).unwrap();
        let k = SymMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.3, 0.0, 0.3, 1.0, 0.4, 0.0, 0.4, 1.0],
        ))
        .unwrap();
        let pc = PartialCovariance::new(d, k).unwrap();
        let out = complete_2serrated(&pc).unwrap();
        // k_{s,J} k_{t,J} / K_J
        assert!((out.kernel[(0, 2)] - 0.3 * 0.4 / 1.0).abs() < 1e-15);
        assert_eq!(out.kernel[(2, 0)], out.kernel[(0, 2)]);
    }

    #[test]
    fn degenerate_separator_fills_zero() {
        let g = Grid::new(5).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.5, 1.0)]).unwrap();
        let mut m = DMatrix::identity(5, 5);
        m[(2, 2)] = 0.0;
        let pc = PartialCovariance::new(d, SymMatrix::new(m).unwrap()).unwrap();
        let out = complete_2serrated(&pc).unwrap();
        assert!(out.per_step[0].degenerate);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.kernel[(0, 4)], 0.0);
    }

    #[test]
    fn rejects_non_psd_block_and_bad_order() {
        let g = Grid::new(5).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.5, 1.0)]).unwrap();
        let mut m = DMatrix::identity(5, 5);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = 2.0;
        assert!(PartialCovariance::new(d.clone(), SymMatrix::new(m).unwrap()).is_err());
        let pc = PartialCovariance::new(d, SymMatrix::identity(5)).unwrap();
        assert!(canonical_completion(&pc, &MergeOrder::Explicit(vec![2])).is_err());
    }

    #[test]
    fn brownian_three_squares() {
        let g = Grid::new(41).unwrap();
        let d = make_serrated_domain(g.clone(), &[(0.0, 0.6), (0.4, 1.0), (0.2, 0.8)]).unwrap();
        let k = brownian(&g);
        let pc = PartialCovariance::restrict(&k, &d).unwrap();
        for order in [MergeOrder::Ascending, MergeOrder::Descending] {
            let out = canonical_completion(&pc, &order).unwrap();
            assert!(max_diff(&out.kernel, &k) <= 1e-8);
        }
    }

    #[test]
    fn single_interval_is_identity() {
        let g = Grid::new(9).unwrap();
        let d = SerratedDomain::full(g);
        let k = random_psd(9, 4);
        let pc = PartialCovariance::restrict(&k, &d).unwrap();
        let out = canonical_completion(&pc, &MergeOrder::Ascending).unwrap();
        assert_eq!(out.kernel, k);
    }

    #[test]
    fn observed_entries_are_copied() {
        let g = Grid::new(30).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.3, 0.7), (0.6, 1.0)]).unwrap();
        let k = random_psd(30, 11);
        let pc = PartialCovariance::restrict(&k, &d).unwrap();
        let mask = d.mask();
        for order in [
            MergeOrder::Ascending,
            MergeOrder::Descending,
            MergeOrder::Explicit(vec![2, 1]),
        ] {
            let out = canonical_completion(&pc, &order).unwrap();
            for i in 0..30 {
                for j in 0..30 {
                    if mask[(i, j)] {
                        assert_eq!(out.kernel[(i, j)].to_bits(), k[(i, j)].to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn order_invariance_random() {
        let g = Grid::new(30).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.3, 0.7), (0.6, 1.0)]).unwrap();
        let pc = PartialCovariance::restrict(&random_psd(30, 5), &d).unwrap();
        let a = canonical_completion(&pc, &MergeOrder::Ascending).unwrap();
        let b = canonical_completion(&pc, &MergeOrder::Descending).unwrap();
        assert!(max_diff(&a.kernel, &b.kernel) <= 1e-8 * (1.0 + a.kernel.max_abs()));
    }

    #[test]
    fn separation_holds_for_canonical() {
        let g = Grid::new(25).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.4), (0.2, 0.6), (0.5, 0.8), (0.7, 1.0)]).unwrap();
        let pc = PartialCovariance::restrict(&random_psd(25, 8), &d).unwrap();
        let out = canonical_completion(&pc, &MergeOrder::Descending).unwrap();
        for r in verify_separation(&out.kernel, &d).unwrap() {
            assert!(r <= 1e-8, "residual {r}");
        }
        assert!(out
            .per_step
            .iter()
            .all(|s| s.separation_residual_max <= 1e-8));
    }

    #[test]
    fn separation_single_interval_is_empty() {
        let g = Grid::new(5).unwrap();
        let d = SerratedDomain::full(g);
        assert!(verify_separation(&SymMatrix::identity(5), &d)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn completion_is_idempotent() {
        let g = Grid::new(24).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.5), (0.3, 0.7), (0.6, 1.0)]).unwrap();
        let pc = PartialCovariance::restrict(&random_psd(24, 21), &d).unwrap();
        let first = canonical_completion(&pc, &MergeOrder::Ascending).unwrap();
        let again = PartialCovariance::restrict(&first.kernel, &d).unwrap();
        let second = canonical_completion(&again, &MergeOrder::Ascending).unwrap();
        assert!(max_diff(&first.kernel, &second.kernel) <= 1e-8);
    }

    #[test]
    fn canonical_is_psd() {
        let g = Grid::new(26).unwrap();
        let d = make_serrated_domain(g, &[(0.0, 0.4), (0.2, 0.6), (0.5, 0.8), (0.7, 1.0)]).unwrap();
        for seed in 0..10 {
            let pc = PartialCovariance::restrict(&random_psd(26, seed), &d).unwrap();
            let out = canonical_completion(&pc, &MergeOrder::Ascending).unwrap();
            assert!(psd_certify(&out.kernel, 1e-6).is_psd);
        }
    }
}
