//! The finite-width random network, its Gaussian limit at finitely many
//! sphere points, and the shared-weights coupling between two activations.

mod gp;
mod network;
mod points;
pub mod rng;

pub use gp::{
    column_covariance, column_covariance_stderr, factor_with_jitter, kernel_expansion, nngp_kernel,
    sample_gp_marginal, KernelMatrix, DEFAULT_KERNEL_DEGREE, MAX_JITTER_STEPS,
};
pub use network::{
    coupled_l2_discrepancy, evaluate_network, feature_sum_of_draw, feature_sum_sample, sample_marginal,
    MonteCarloEstimate, NetworkDraw, ProcessMarginalSample, SampleMetadata,
};
pub use points::{sphere_sample, PointSet, UNIT_TOLERANCE};
