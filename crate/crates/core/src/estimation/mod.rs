//! Recovering the canonical completion from sample path fragments.
//!
//! The estimator runs the same ascending recursion as the exact completion,
//! replacing each separator inverse by a rank-`N_p` spectral truncation of
//! the estimated block `K̂_{J_p}`.

mod empirical;
mod fragments;
mod truncation;

use nalgebra::DMatrix;

pub use empirical::{
    local_average_smooth, pairwise_empirical, PartialCovEstimate, DEFAULT_MIN_COUNT,
    DEFAULT_MIN_WEIGHT,
};
pub use fragments::{Fragment, FragmentSet};
pub use truncation::{fve_rank, rate_schedule, schedule_exponent, TruncationRule};

use crate::completion::{fill_with_rank, finish, separator_eigen, CompletionResult, StepRecord};
use crate::domain::SerratedDomain;
use crate::error::{Error, Result};
use crate::linalg::EigenDecomposition;

/// Eigenvalues at or below this fraction of the leading one count as zero.
const NUMERICAL_ZERO: f64 = 1e3 * f64::EPSILON;

fn usable_rank(eig: &EigenDecomposition) -> usize {
    let floor = NUMERICAL_ZERO * eig.leading();
    eig.eigenvalues
        .iter()
        .take_while(|&&l| l > 0.0 && l > floor)
        .count()
}

fn coverage_gap(est_mask: &DMatrix<bool>, domain: &SerratedDomain) -> Option<String> {
    let grid = domain.grid();
    for (k, iv) in domain.intervals().iter().enumerate() {
        let missing: Vec<(usize, usize)> = iv
            .range()
            .flat_map(|i| iv.range().map(move |j| (i, j)))
            .filter(|&(i, j)| !est_mask[(i, j)])
            .collect();
        if let Some(&(i, j)) = missing.first() {
            return Some(format!(
                "{} entries of square {} ([{}, {}]²) are missing from the estimate, first at (s, t) = ({}, {})",
                missing.len(),
                k + 1,
                grid.node(iv.a),
                grid.node(iv.b),
                grid.node(i),
                grid.node(j),
            ));
        }
    }
    None
}

/// Regularized estimate of the canonical completion from `est`.
pub fn estimate_canonical(
    est: &PartialCovEstimate,
    domain: &SerratedDomain,
    rule: &TruncationRule,
) -> Result<CompletionResult> {
    rule.validate()?;
    let n = domain.grid().n();
    if est.values.dim() != n {
        return Err(Error::Shape(format!(
            "estimate has dimension {} but the domain grid has {n} nodes",
            est.values.dim()
        )));
    }
    if let Some(gap) = coverage_gap(&est.mask, domain) {
        return Err(Error::Coverage(gap));
    }

    let mask = domain.mask();
    let mut k = est.values.as_matrix().clone();
    for (v, &inside) in k.iter_mut().zip(mask.iter()) {
        if !inside {
            *v = 0.0;
        }
    }

    let m = domain.m();
    let mut per_step = Vec::with_capacity(m.saturating_sub(1));
    let mut warnings = Vec::new();
    for r in domain.all_regions() {
        let eig = separator_eigen(&k, &r.j)?;
        let requested = rule.requested_rank(r.p, m, &eig)?;
        let usable = usable_rank(&eig);
        let rank = requested.min(usable);
        if rank < requested {
            warnings.push(format!(
                "step {}: requested rank {requested} reduced to {rank} (separator block has {} nodes, {usable} positive eigenvalues)",
                r.p,
                r.j.len()
            ));
        }
        let fill = fill_with_rank(&mut k, &r.s, &r.j, &r.d, &eig, rank);
        if fill.degenerate {
            warnings.push(format!("step {}: estimated separator block is zero", r.p));
        }
        per_step.push(StepRecord {
            p: r.p,
            rank_used: fill.rank,
            lambda_min_j: fill.lambda_min,
            lambda_cutoff: fill.lambda_cutoff,
            separation_residual_max: 0.0,
            degenerate: fill.degenerate,
        });
    }
    let order = (1..m).collect();
    finish(k, domain, per_step, order, warnings)
}
