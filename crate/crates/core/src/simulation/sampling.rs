use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::SerratedDomain;
use crate::error::{Error, Result};
use crate::estimation::{Fragment, FragmentSet};
use crate::linalg::{psd_certify, sym_eigen, SymMatrix};

pub const SAMPLER_PSD_TOL: f64 = 1e-6;

/// Observation design for simulated fragments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every node of the chosen interval is observed.
    Regular,
    /// A fixed number of the interval's nodes, drawn without replacement.
    Sparse {
        #[serde(default = "default_points")]
        points_per_curve: usize,
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
    },
}

fn default_points() -> usize {
    6
}

fn default_bandwidth() -> f64 {
    0.05
}

impl Regime {
    pub fn sparse_default() -> Self {
        Regime::Sparse {
            points_per_curve: default_points(),
            bandwidth: default_bandwidth(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Regime::Sparse {
                points_per_curve, ..
            } if *points_per_curve < 2 => Err(Error::InvalidInput(format!(
                "sparse regime needs at least 2 points per curve, got {points_per_curve}"
            ))),
            Regime::Sparse { bandwidth, .. } if !(*bandwidth > 0.0) => Err(Error::InvalidInput(
                format!("sparse regime bandwidth must be positive, got {bandwidth}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Draws Gaussian fragments: each curve lives on one interval of the cover,
/// chosen uniformly, with covariance the restriction of `K`.
#[derive(Debug, Clone)]
pub struct FragmentSampler {
    domain: SerratedDomain,
    /// `V diag(√λ⁺)` per interval.
    factors: Vec<DMatrix<f64>>,
}

impl FragmentSampler {
    pub fn new(k: &SymMatrix, domain: &SerratedDomain) -> Result<Self> {
        let n = domain.grid().n();
        if k.dim() != n {
            return Err(Error::Shape(format!(
                "kernel has dimension {} but the grid has {n} nodes",
                k.dim()
            )));
        }
        let cert = psd_certify(k, SAMPLER_PSD_TOL);
        if !cert.is_psd {
            return Err(Error::NotPsd {
                min_eigenvalue: cert.min_eigenvalue,
            });
        }
        let factors = domain
            .intervals()
            .iter()
            .map(|iv| {
                let e = sym_eigen(&k.principal_range(iv.range()))?;
                let mut f = e.eigenvectors.clone();
                for (mut col, &l) in f.column_iter_mut().zip(&e.eigenvalues) {
                    col *= l.max(0.0).sqrt();
                }
                Ok(f)
            })
            .collect::<Result<_>>()?;
        Ok(FragmentSampler {
            domain: domain.clone(),
            factors,
        })
    }

    pub fn sample(&self, n_curves: usize, regime: &Regime, seed: u64) -> Result<FragmentSet> {
        regime.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ivs = self.domain.intervals();
        let mut curves = Vec::with_capacity(n_curves);
        for _ in 0..n_curves {
            let u = rng.random_range(0..ivs.len());
            let iv = ivs[u];
            let z = DVector::from_fn(iv.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.factors[u] * z;
            let curve = match regime {
                Regime::Regular => {
                    Fragment::new(iv.range().collect(), x.iter().copied().collect())?
                }
                Regime::Sparse {
                    points_per_curve, ..
                } => {
                    let keep = (*points_per_curve).min(iv.len());
                    let mut pick = index::sample(&mut rng, iv.len(), keep).into_vec();
                    pick.sort_unstable();
                    Fragment::new(
                        pick.iter().map(|&i| iv.a + i).collect(),
                        pick.iter().map(|&i| x[i]).collect(),
                    )?
                }
            };
            curves.push(curve);
        }
        FragmentSet::new(self.domain.grid().clone(), curves)
    }
}

pub fn sample_fragments(
    k: &SymMatrix,
    domain: &SerratedDomain,
    n_curves: usize,
    regime: &Regime,
    seed: u64,
) -> Result<FragmentSet> {
    FragmentSampler::new(k, domain)?.sample(n_curves, regime, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::simulation::kernels::{builtin_domain, kernel_matrix, KernelId};

    #[test]
    fn zero_kernel_gives_zero_values() {
        let g = Grid::new(20).unwrap();
        let d = builtin_domain(2, &g).unwrap();
        let set = sample_fragments(&SymMatrix::zeros(20), &d, 30, &Regime::Regular, 1).unwrap();
        assert!(set
            .curves()
            .iter()
            .all(|c| c.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn brownian_sample_covariance() {
        let g = Grid::new(11).unwrap();
        let d = SerratedDomain::full(g.clone());
        let k = kernel_matrix(KernelId::K2, &g);
        let n = 10_000;
        let set = sample_fragments(&k, &d, n, &Regime::Regular, 7).unwrap();
        let (i, j) = (3, 7);
        let prods: Vec<f64> = set
            .curves()
            .iter()
            .map(|c| c.values[i] * c.values[j])
            .collect();
        let mean = prods.iter().sum::<f64>() / n as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn deterministic_in_seed() {
        let g = Grid::new(30).unwrap();
        let d = builtin_domain(3, &g).unwrap();
        let k = kernel_matrix(KernelId::K3, &g);
        let s = FragmentSampler::new(&k, &d).unwrap();
        for regime in [Regime::Regular, Regime::sparse_default()] {
            assert_eq!(
                s.sample(25, &regime, 99).unwrap(),
                s.sample(25, &regime, 99).unwrap()
            );
            assert_ne!(
                s.sample(25, &regime, 99).unwrap(),
                s.sample(25, &regime, 100).unwrap()
            );
        }
    }

    #[test]
    fn fragments_stay_inside_one_interval() {
        let g = Grid::new(40).unwrap();
        let d = builtin_domain(2, &g).unwrap();
        let k = kernel_matrix(KernelId::K1, &g);
        let set = sample_fragments(&k, &d, 50, &Regime::sparse_default(), 3).unwrap();
        for c in set.curves() {
            assert_eq!(c.support.len(), 6);
            let (lo, hi) = (c.support[0], *c.support.last().unwrap());
            assert!(d
                .intervals()
                .iter()
                .any(|iv| iv.contains(lo) && iv.contains(hi)));
        }
    }

    #[test]
    fn rejects_indefinite_kernel_and_bad_regime() {
        let g = Grid::new(5).unwrap();
        let d = SerratedDomain::full(g.clone());
        let k = SymMatrix::from_diagonal(&[1.0, 1.0, -0.5, 1.0, 1.0]);
        assert!(matches!(
            sample_fragments(&k, &d, 3, &Regime::Regular, 0),
            Err(Error::NotPsd { .. })
        ));
        let bad = Regime::Sparse {
            points_per_curve: 1,
            bandwidth: 0.1,
        };
        assert!(sample_fragments(&SymMatrix::identity(5), &d, 3, &bad, 0).is_err());
    }
}
