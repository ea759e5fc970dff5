use serde::{Deserialize, Serialize};

use super::PartialCovariance;
use crate::error::Result;
use crate::linalg::{schur_complement, EXACT_REL_TOL};

pub const DEFAULT_UNIQUENESS_TOL: f64 = 1e-6;

/// Schur-complement test for a unique completion.
///
/// `forward[p-1]` is `‖K_{I_p} / K_{J_p}‖ / ‖K_{I_p}‖` and `backward[q-1]`
/// is `‖K_{I_{q+1}} / K_{J_q}‖ / ‖K_{I_{q+1}}‖` (Hilbert–Schmidt norms).
/// The completion is unique iff for some pivot `r` every forward norm with
/// `p < r` and every backward norm with `q >= r` vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub unique: bool,
    /// Pivot with the smallest worst-case norm, 1-based.
    pub r: Option<usize>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub tol: f64,
}

fn relative_schur(pc: &PartialCovariance, outer: &[usize], sep: &[usize]) -> Result<f64> {
    let v = pc.values();
    let whole = v.principal(outer).as_matrix().norm();
    if whole == 0.0 {
        return Ok(0.0);
    }
    let s = schur_complement(v, outer, sep, EXACT_REL_TOL)?;
    Ok(s.as_matrix().norm() / whole)
}

pub fn uniqueness_check(pc: &PartialCovariance, rel_tol: f64) -> Result<UniquenessReport> {
    let domain = pc.domain();
    let ivs = domain.intervals();
    let m = domain.m();
    let mut forward = Vec::with_capacity(m.saturating_sub(1));
    let mut backward = Vec::with_capacity(m.saturating_sub(1));
    for r in domain.all_regions() {
        let sep: Vec<usize> = r.j.clone().collect();
        let left: Vec<usize> = ivs[r.p - 1].range().collect();
        let right: Vec<usize> = ivs[r.p].range().collect();
        forward.push(relative_schur(pc, &left, &sep)?);
        backward.push(relative_schur(pc, &right, &sep)?);
    }

    let mut best: Option<(usize, f64)> = None;
    for r in 1..=m {
        let worst = forward[..r - 1]
            .iter()
            .chain(&backward[r - 1..])
            .fold(0.0f64, |acc, &x| acc.max(x));
        if best.is_none_or(|(_, w)| worst < w) {
            best = Some((r, worst));
        }
    }
    let (r, worst) = best.expect("m >= 1");
    Ok(UniquenessReport {
        unique: worst <= rel_tol,
        r: Some(r),
        forward,
        backward,
        tol: rel_tol,
    })
}
