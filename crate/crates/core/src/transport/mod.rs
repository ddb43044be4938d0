//! Squared Wasserstein-2 estimators between samples and Gaussians, and the
//! rate bounds they are compared against.

mod assignment;
mod bounds;
mod estimate;
mod gaussian;
mod marginal;
mod sinkhorn;

pub use assignment::{solve_assignment, w2_1d, w2_exact, ASSIGNMENT_CAP};
pub use bounds::{
    bonis_rhs, bound_theorem31, bound_theorem34, bound_theorem51, general_activation_degree,
    quadratic_reference_rate, whiten, BoundConstants, BoundKind, BoundSpec,
};
pub(crate) use estimate::rows_of;
pub(crate) use marginal::estimate_rows;
pub use estimate::{EmpiricalSample, Estimator, Normalization, TransportEstimate};
pub use gaussian::{psd_sqrt, w2_gaussian, PSD_TOLERANCE};
pub use marginal::{
    estimate_w2, marginal_transport_estimate, marginal_transport_estimate_with, TransportMethod,
    TransportOptions, DEFAULT_BOOTSTRAP,
};
pub use sinkhorn::{
    median_cost, sinkhorn_divergence, DEFAULT_EPSILON_FACTOR, DEFAULT_SINKHORN_ITERS, SINKHORN_TOLERANCE,
};
