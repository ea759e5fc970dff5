//! Shared fixtures for the benchmarks.

use kernelcomp::{
    builtin_domain, kernel_matrix, Grid, KernelId, PartialCovariance, SerratedDomain,
};

/// `K` restricted to the benchmark domain `Ω_j` on a grid of `n` nodes.
pub fn fixture(kernel: KernelId, omega: usize, n: usize) -> (SerratedDomain, PartialCovariance) {
    let grid = Grid::new(n).expect("grid");
    let domain = builtin_domain(omega, &grid).expect("domain");
    let pc = PartialCovariance::restrict(&kernel_matrix(kernel, &grid), &domain).expect("partial");
    (domain, pc)
}
