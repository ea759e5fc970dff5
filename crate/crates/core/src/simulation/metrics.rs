use nalgebra::DMatrix;

use crate::domain::Grid;
use crate::error::{Error, Result};

/// `w² Σ_{(i,j) ∈ mask} (A − B)²(i, j)`.
pub fn ise(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &DMatrix<bool>, grid: &Grid) -> f64 {
    let w = grid.weight();
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| (x - y) * (x - y))
        .sum();
    w * w * sum
}

/// `∫_region K²` on the grid.
pub fn squared_norm(k: &DMatrix<f64>, mask: &DMatrix<bool>, grid: &Grid) -> f64 {
    ise(k, &DMatrix::zeros(k.nrows(), k.ncols()), mask, grid)
}

/// Ratio of the relative error off the domain to the relative error on it.
pub fn rre(ise_out: f64, ise_in: f64, norm_out: f64, norm_in: f64) -> Result<f64> {
    if norm_out == 0.0 || norm_in == 0.0 {
        return Err(Error::UndefinedMetric("zero kernel norm in RRE".into()));
    }
    if ise_in == 0.0 {
        return Err(Error::UndefinedMetric("zero in-domain error in RRE".into()));
    }
    Ok((ise_out / norm_out) / (ise_in / norm_in))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean absolute deviation about the median.
pub fn mad(values: &[f64]) -> f64 {
    let med = median(values);
    values.iter().map(|v| (v - med).abs()).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_norm;
    use proptest::prelude::*;

    #[test]
    fn ise_examples() {
        let g = Grid::new(6).unwrap();
        let a = DMatrix::from_fn(6, 6, |i, j| (i * j) as f64);
        let full = DMatrix::from_element(6, 6, true);
        assert_eq!(ise(&a, &a, &full, &g), 0.0);

        let mut mask = DMatrix::from_element(6, 6, false);
        for k in 0..7 {
            mask[k * 5] = true;
        }
        let w = g.weight();
        let b = a.add_scalar(0.5);
        assert!((ise(&a, &b, &mask, &g) - 0.25 * 7.0 * w * w).abs() < 1e-15);

        let c = DMatrix::from_fn(6, 6, |i, j| ((i + 2 * j) as f64).sin());
        let hs = hs_norm(&(&a - &c), &g);
        assert!((ise(&a, &c, &full, &g) - hs * hs).abs() < 1e-12);
    }

    #[test]
    fn rre_examples() {
        assert!((rre(0.3, 0.1, 3.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rre(0.02, 0.01, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            rre(0.1, 0.1, 0.0, 1.0),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((mad(&[1.0, 2.0, 6.0]) - 5.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn median_within_range(v in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let med = median(&v);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= med && med <= hi);
            prop_assert!(mad(&v) >= 0.0);
        }
    }
}
