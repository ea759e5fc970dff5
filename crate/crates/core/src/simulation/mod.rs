//! Benchmark kernels and domains, Gaussian fragment generation and the
//! Monte Carlo study of the estimator.

mod experiment;
mod kernels;
mod metrics;
mod sampling;

pub use experiment::{
    run_experiment, write_plot_csv, DomainChoice, ExperimentConfig, ExperimentReport, KernelChoice,
    ReplicationRow, Summary,
};
pub use kernels::{builtin_domain, builtin_endpoints, kernel_matrix, kernel_value, KernelId};
pub use metrics::{ise, mad, median, rre, squared_norm};
pub use sampling::{sample_fragments, FragmentSampler, Regime, SAMPLER_PSD_TOL};
