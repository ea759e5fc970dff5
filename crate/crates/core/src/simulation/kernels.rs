use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Grid, SerratedDomain};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// The three benchmark covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelId {
    /// Rank four: `Σ_{j=1}^4 φ_j(s) φ_j(t) / 2^{j−1}` over shifted
    /// Legendre polynomials.
    K1,
    /// Brownian motion, `min(s, t)`.
    K2,
    /// `10 s t exp(−10 (s − t)²)`.
    K3,
}

impl KernelId {
    pub const ALL: [KernelId; 3] = [KernelId::K1, KernelId::K2, KernelId::K3];
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelId::K1 => "K1",
            KernelId::K2 => "K2",
            KernelId::K3 => "K3",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "K1" => Ok(KernelId::K1),
            "K2" => Ok(KernelId::K2),
            "K3" => Ok(KernelId::K3),
            _ => Err(Error::InvalidInput(format!(
                "unknown kernel {s:?} (expected K1, K2 or K3)"
            ))),
        }
    }
}

fn legendre(t: f64) -> [f64; 4] {
    [
        1.0,
        3f64.sqrt() * (2.0 * t - 1.0),
        5f64.sqrt() * (6.0 * t * t - 6.0 * t + 1.0),
        7f64.sqrt() * (20.0 * t * t * t - 30.0 * t * t + 12.0 * t - 1.0),
    ]
}

pub fn kernel_value(id: KernelId, s: f64, t: f64) -> f64 {
    match id {
        KernelId::K1 => {
            let (ps, pt) = (legendre(s), legendre(t));
            (0..4)
                .map(|j| ps[j] * pt[j] / f64::powi(2.0, j as i32))
                .sum()
        }
        KernelId::K2 => s.min(t),
        KernelId::K3 => 10.0 * s * t * (-10.0 * (s - t) * (s - t)).exp(),
    }
}

pub fn kernel_matrix(id: KernelId, grid: &Grid) -> SymMatrix {
    SymMatrix::from_fn(grid.n(), |i, j| {
        kernel_value(id, grid.node(i), grid.node(j))
    })
}

/// Cover endpoints of the nested benchmark domains `Ω_1 ⊂ … ⊂ Ω_5`, which
/// have 2, 3, 5, 9 and 17 intervals.
pub fn builtin_endpoints(j: usize) -> Result<Vec<(f64, f64)>> {
    if !(1..=5).contains(&j) {
        return Err(Error::InvalidInput(format!(
            "no builtin domain Omega{j} (expected 1..=5)"
        )));
    }
    let mut iv = vec![(0.0, 0.6), (0.4, 1.0)];
    if j >= 2 {
        iv.push((0.2, 0.8));
    }
    if j >= 3 {
        iv.extend([(0.1, 0.7), (0.3, 0.9)]);
    }
    if j >= 4 {
        iv.extend((0..4).map(|k| {
            let a = (2 * k + 1) as f64;
            (a / 20.0, (a + 12.0) / 20.0)
        }));
    }
    if j >= 5 {
        iv.extend((0..8).map(|k| {
            let a = (2 * k + 1) as f64;
            (a / 40.0, (a + 24.0) / 40.0)
        }));
    }
    Ok(iv)
}

pub fn builtin_domain(j: usize, grid: &Grid) -> Result<SerratedDomain> {
    SerratedDomain::from_endpoints(grid.clone(), &builtin_endpoints(j)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_value(KernelId::K2, 0.3, 0.7), 0.3);
        assert!((kernel_value(KernelId::K1, 0.0, 0.0) - 4.625).abs() < 1e-12);
        assert_eq!(kernel_value(KernelId::K3, 1.0, 1.0), 10.0);
        assert!("K4".parse::<KernelId>().is_err());
        assert_eq!("k2".parse::<KernelId>().unwrap(), KernelId::K2);
    }

    #[test]
    fn legendre_basis_is_orthonormal() {
        // Gauss–Legendre with 5 nodes integrates degree ≤ 9 exactly.
        let x = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        let w = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        for a in 0..4 {
            for b in 0..4 {
                let v: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| {
                        let p = legendre(0.5 * (xi + 1.0));
                        0.5 * wi * p[a] * p[b]
                    })
                    .sum();
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn builtin_domain_sizes() {
        let g = Grid::new(100).unwrap();
        let ms: Vec<usize> = (1..=5)
            .map(|j| builtin_domain(j, &g).unwrap().m())
            .collect();
        assert_eq!(ms, vec![2, 3, 5, 9, 17]);
        assert!(builtin_domain(6, &g).is_err());
        assert!(builtin_domain(0, &g).is_err());
        let o1 = builtin_domain(1, &g).unwrap();
        assert_eq!((o1.intervals()[0].b, o1.intervals()[1].a), (59, 40));
    }
}
