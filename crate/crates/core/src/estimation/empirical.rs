use nalgebra::DMatrix;

use super::fragments::FragmentSet;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

pub const DEFAULT_MIN_COUNT: usize = 10;

/// Smoother support threshold: entries with less total kernel weight are
/// left out of the mask.
pub const DEFAULT_MIN_WEIGHT: f64 = 1e-3;

/// Gaussian weights are dropped beyond this many bandwidths.
const SMOOTHER_REACH: f64 = 4.0;

/// Estimated covariance values with their support.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCovEstimate {
    pub values: SymMatrix,
    /// Number of contributing products per entry.
    pub count: DMatrix<usize>,
    /// Entries admitted into the estimate.
    pub mask: DMatrix<bool>,
    /// Number of curves the estimate was built from.
    pub n_curves: usize,
}

/// `K̂(s,t) = (1/n(s,t)) Σ_{j: s,t ∈ U_j} X_j(s) X_j(t)` wherever
/// `n(s,t) >= min_count`. Processes are taken as centered.
pub fn pairwise_empirical(frags: &FragmentSet, min_count: usize) -> Result<PartialCovEstimate> {
    if frags.is_empty() {
        return Err(Error::InvalidInput("no fragments".into()));
    }
    let min_count = min_count.max(1);
    let n = frags.grid().n();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut count = DMatrix::<usize>::zeros(n, n);
    for curve in frags.curves() {
        let (idx, x) = (&curve.support, &curve.values);
        for a in 0..idx.len() {
            for b in a..idx.len() {
                let v = x[a] * x[b];
                sum[(idx[a], idx[b])] += v;
                count[(idx[a], idx[b])] += 1;
                if a != b {
                    sum[(idx[b], idx[a])] += v;
                    count[(idx[b], idx[a])] += 1;
                }
            }
        }
    }
    let mask = count.map(|c| c >= min_count);
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyEstimate);
    }
    let mut values = DMatrix::zeros(n, n);
    for (k, &inside) in mask.iter().enumerate() {
        if inside {
            values[k] = sum[k] / count[k] as f64;
        }
    }
    Ok(PartialCovEstimate {
        values: SymMatrix::from_symmetric(values),
        count,
        mask,
        n_curves: frags.len(),
    })
}

/// Nadaraya–Watson average of within-curve products `X_j(t_a) X_j(t_b)`,
/// Gaussian weight in `max(|s − t_a|, |t − t_b|) / bandwidth`.
pub fn local_average_smooth(
    frags: &FragmentSet,
    bandwidth: f64,
    min_weight: f64,
) -> Result<PartialCovEstimate> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if frags.is_empty() {
        return Err(Error::InvalidInput("no fragments".into()));
    }
    let grid = frags.grid();
    let n = grid.n();
    let reach = (SMOOTHER_REACH * bandwidth / grid.spacing()).ceil() as usize;
    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = DMatrix::<f64>::zeros(n, n);
    let mut count = DMatrix::<usize>::zeros(n, n);
    let window = |c: usize| c.saturating_sub(reach)..(c + reach + 1).min(n);

    for curve in frags.curves() {
        let (idx, x) = (&curve.support, &curve.values);
        for a in 0..idx.len() {
            for b in 0..idx.len() {
                let (ta, tb) = (grid.node(idx[a]), grid.node(idx[b]));
                let v = x[a] * x[b];
                for i in window(idx[a]) {
                    let ds = (grid.node(i) - ta).abs();
                    // only the upper triangle; mirrored below
                    for j in window(idx[b]).filter(|&j| j >= i) {
                        let dist = ds.max((grid.node(j) - tb).abs()) / bandwidth;
                        if dist > SMOOTHER_REACH {
                            continue;
                        }
                        let w = (-0.5 * dist * dist).exp();
                        num[(i, j)] += w * v;
                        den[(i, j)] += w;
                        count[(i, j)] += 1;
                    }
                }
            }
        }
    }

    let mut values = DMatrix::zeros(n, n);
    let mut mask = DMatrix::from_element(n, n, false);
    for j in 0..n {
        for i in 0..=j {
            count[(j, i)] = count[(i, j)];
            if den[(i, j)] >= min_weight && den[(i, j)] > 0.0 {
                let v = num[(i, j)] / den[(i, j)];
                values[(i, j)] = v;
                values[(j, i)] = v;
                mask[(i, j)] = true;
                mask[(j, i)] = true;
            }
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyEstimate);
    }
    Ok(PartialCovEstimate {
        values: SymMatrix::from_symmetric(values),
        count,
        mask,
        n_curves: frags.len(),
    })
}
