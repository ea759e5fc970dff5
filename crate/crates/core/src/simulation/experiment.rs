use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{builtin_domain, kernel_matrix, KernelId};
use super::metrics::{ise, mad, median, rre, squared_norm};
use super::sampling::{FragmentSampler, Regime};
use crate::domain::{Grid, SerratedDomain};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_canonical, local_average_smooth, pairwise_empirical, PartialCovEstimate,
    TruncationRule, DEFAULT_MIN_WEIGHT,
};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Builtin(KernelId),
    /// Kernel values on the experiment grid, row-major.
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainChoice {
    /// `"Omega1"` .. `"Omega5"`.
    Builtin(String),
    /// Interval endpoints in `[0, 1]`, snapped to the experiment grid.
    Custom { intervals: Vec<[f64; 2]> },
}

impl DomainChoice {
    pub fn omega(j: usize) -> Self {
        DomainChoice::Builtin(format!("Omega{j}"))
    }

    pub fn build(&self, grid: &Grid) -> Result<SerratedDomain> {
        match self {
            DomainChoice::Builtin(name) => {
                let j = name
                    .strip_prefix("Omega")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown domain {name:?}")))?;
                builtin_domain(j, grid)
            }
            DomainChoice::Custom { intervals } => {
                let iv: Vec<(f64, f64)> = intervals.iter().map(|&[l, r]| (l, r)).collect();
                SerratedDomain::from_endpoints(grid.clone(), &iv)
            }
        }
    }
}

fn default_min_count() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: KernelChoice,
    pub domain: DomainChoice,
    pub n_curves: usize,
    pub grid_n: usize,
    pub regime: Regime,
    pub truncation: TruncationRule,
    pub replications: usize,
    pub base_seed: u64,
    /// Products needed before a pairwise entry is admitted.
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// Feed the true kernel on the domain to the estimator instead of an
    /// empirical estimate.
    #[serde(default)]
    pub exact_partial: bool,
}

impl ExperimentConfig {
    pub fn new(
        kernel: KernelId,
        domain: usize,
        n_curves: usize,
        truncation: TruncationRule,
    ) -> Self {
        ExperimentConfig {
            kernel: KernelChoice::Builtin(kernel),
            domain: DomainChoice::omega(domain),
            n_curves,
            grid_n: 100,
            regime: Regime::Regular,
            truncation,
            replications: 100,
            base_seed: 0,
            min_count: default_min_count(),
            exact_partial: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput(
                "replications must be at least 1".into(),
            ));
        }
        if self.n_curves == 0 {
            return Err(Error::InvalidInput("n_curves must be at least 1".into()));
        }
        self.regime.validate()?;
        self.truncation.validate()
    }

    fn kernel_matrix(&self, grid: &Grid) -> Result<SymMatrix> {
        match &self.kernel {
            KernelChoice::Builtin(id) => Ok(kernel_matrix(*id, grid)),
            KernelChoice::Matrix { matrix } => {
                let n = grid.n();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Shape(format!("custom kernel must be {n}x{n}")));
                }
                SymMatrix::new(nalgebra::DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
        }
    }

    /// The truncation rule with a schedule's sample count filled in.
    fn resolved_rule(&self) -> TruncationRule {
        match &self.truncation {
            TruncationRule::Schedule {
                n: 0,
                alpha,
                beta,
                scale,
            } => TruncationRule::Schedule {
                n: self.n_curves,
                alpha: *alpha,
                beta: *beta,
                scale: *scale,
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub ise_in: f64,
    pub ise_out: f64,
    /// Absent when the in-domain error is exactly zero.
    pub rre: Option<f64>,
    pub ranks: Vec<usize>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mad: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Summary {
            median: median(values),
            mad: mad(values),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kernel: String,
    pub m: usize,
    pub n_curves: usize,
    pub grid_n: usize,
    pub replications: Vec<ReplicationRow>,
    pub ise_in: Summary,
    pub ise_out: Summary,
    pub rre: Option<Summary>,
    /// `∫_Ω K²`.
    pub norm_in: f64,
    /// `∫_{Ω^c} K²`.
    pub norm_out: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_replications_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "replication",
            "seed",
            "ise_in",
            "ise_out",
            "rre",
            "ranks",
            "min_eigenvalue",
        ])
        .map_err(csv_err)?;
        for r in &self.replications {
            let ranks: Vec<String> = r.ranks.iter().map(|x| x.to_string()).collect();
            out.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                r.ise_in.to_string(),
                r.ise_out.to_string(),
                r.rre.map(|x| x.to_string()).unwrap_or_default(),
                ranks.join(" "),
                r.min_eigenvalue.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Plot data for RRE boxplots: one row per report, keyed by `m` and `n`.
pub fn write_plot_csv<W: Write>(reports: &[ExperimentReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "kernel",
        "m",
        "n",
        "median_rre",
        "mad_rre",
        "median_ise_in",
        "median_ise_out",
    ])
    .map_err(csv_err)?;
    for r in reports {
        let (med, dev) = r
            .rre
            .map(|s| (s.median.to_string(), s.mad.to_string()))
            .unwrap_or_default();
        out.write_record([
            r.kernel.clone(),
            r.m.to_string(),
            r.n_curves.to_string(),
            med,
            dev,
            r.ise_in.median.to_string(),
            r.ise_out.median.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

struct Setup {
    kernel: SymMatrix,
    domain: SerratedDomain,
    sampler: FragmentSampler,
    rule: TruncationRule,
    inside: nalgebra::DMatrix<bool>,
    outside: nalgebra::DMatrix<bool>,
}

fn replicate(
    cfg: &ExperimentConfig,
    setup: &Setup,
    r: usize,
    norms: (f64, f64),
) -> Result<ReplicationRow> {
    let seed = cfg.base_seed ^ r as u64;
    let est = if cfg.exact_partial {
        let n = setup.kernel.dim();
        PartialCovEstimate {
            values: setup.kernel.clone(),
            count: nalgebra::DMatrix::from_element(n, n, cfg.n_curves),
            mask: setup.inside.clone(),
            n_curves: cfg.n_curves,
        }
    } else {
        let frags = setup.sampler.sample(cfg.n_curves, &cfg.regime, seed)?;
        match &cfg.regime {
            Regime::Regular => pairwise_empirical(&frags, cfg.min_count)?,
            Regime::Sparse { bandwidth, .. } => {
                local_average_smooth(&frags, *bandwidth, DEFAULT_MIN_WEIGHT)?
            }
        }
    };
    let out = estimate_canonical(&est, &setup.domain, &setup.rule)?;
    let grid = setup.domain.grid();
    let (k_hat, k) = (out.kernel.as_matrix(), setup.kernel.as_matrix());
    let ise_in = ise(k_hat, k, &setup.inside, grid);
    let ise_out = ise(k_hat, k, &setup.outside, grid);
    let rre = match rre(ise_out, ise_in, norms.1, norms.0) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) if ise_in == 0.0 => None,
        Err(e) => return Err(e),
    };
    Ok(ReplicationRow {
        replication: r,
        seed,
        ise_in,
        ise_out,
        rre,
        ranks: out.per_step.iter().map(|s| s.rank_used).collect(),
        min_eigenvalue: out.min_eigenvalue,
    })
}

/// Monte Carlo study of the estimator. Replication `r` draws its fragments
/// from seed `base_seed ^ r`, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid_n)?;
    let domain = cfg.domain.build(&grid)?;
    let kernel = cfg.kernel_matrix(&grid)?;
    let sampler = FragmentSampler::new(&kernel, &domain)?;
    let inside = domain.mask();
    let outside = inside.map(|b| !b);
    let norm_in = squared_norm(kernel.as_matrix(), &inside, &grid);
    let norm_out = squared_norm(kernel.as_matrix(), &outside, &grid);
    let setup = Setup {
        kernel,
        domain,
        sampler,
        rule: cfg.resolved_rule(),
        inside,
        outside,
    };

    let rows: Vec<ReplicationRow> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            replicate(cfg, &setup, r, (norm_in, norm_out)).map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let col =
        |f: fn(&ReplicationRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let ise_in = Summary::of(&col(|r| Some(r.ise_in))).expect("at least one replication");
    let ise_out = Summary::of(&col(|r| Some(r.ise_out))).expect("at least one replication");
    let rre = Summary::of(&col(|r| r.rre));
    Ok(ExperimentReport {
        kernel: match &cfg.kernel {
            KernelChoice::Builtin(id) => id.to_string(),
            KernelChoice::Matrix { .. } => "custom".into(),
        },
        m: setup.domain.m(),
        n_curves: cfg.n_curves,
        grid_n: cfg.grid_n,
        replications: rows,
        ise_in,
        ise_out,
        rre,
        norm_in,
        norm_out,
    })
}
