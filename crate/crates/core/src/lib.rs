//! Covariance completion on serrated domains.
//!
//! A covariance known only on a union of overlapping diagonal squares is
//! extended to the unit square by propagating cross-covariances through the
//! overlaps. The crate provides the exact completion, a test for when it is
//! the only one, a parametrization of all others, an estimator working from
//! sample path fragments, and the simulation study around it.
//!
//! ```
//! use kernelcomp::{canonical_completion, make_serrated_domain, Grid, MergeOrder,
//!                  PartialCovariance, SymMatrix};
//!
//! let grid = Grid::new(21).unwrap();
//! let domain = make_serrated_domain(grid.clone(), &[(0.0, 0.6), (0.4, 1.0)]).unwrap();
//! let brownian = SymMatrix::from_fn(21, |i, j| grid.node(i).min(grid.node(j)));
//! let pc = PartialCovariance::restrict(&brownian, &domain).unwrap();
//! let done = canonical_completion(&pc, &MergeOrder::Ascending).unwrap();
//! assert!((done.kernel.as_matrix() - brownian.as_matrix()).amax() < 1e-8);
//! ```

pub mod completion;
pub mod domain;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod simulation;

pub use completion::{
    assemble_block_operator, canonical_completion, complete_2serrated, perturbed_completion,
    random_contraction, uniqueness_check, verify_separation, CompletionResult, ContractionSet,
    MergeOrder, PartialCovariance, StepRecord, UniquenessReport, DEFAULT_UNIQUENESS_TOL,
};
pub use domain::{
    derived_regions, inscribe_band, make_grid, make_serrated_domain, membership, DomainSpec, Grid,
    IntervalIdx, Regions, SerratedDomain,
};
pub use error::{Error, Result};
pub use estimation::{
    estimate_canonical, local_average_smooth, pairwise_empirical, Fragment, FragmentSet,
    PartialCovEstimate, TruncationRule,
};
pub use linalg::{
    hs_norm, op_norm, psd_certify, psd_sqrt, schur_complement, sym_eigen, truncated_pinv, Cutoff,
    EigenDecomposition, PsdCertificate, SymMatrix, EXACT_REL_TOL,
};
pub use simulation::{
    builtin_domain, ise, kernel_matrix, kernel_value, rre, run_experiment, sample_fragments,
    ExperimentConfig, ExperimentReport, KernelId, Regime,
};
