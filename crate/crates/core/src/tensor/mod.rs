//! Polynomial feature space `H`, the bilinear form `Q`, and the covariance of
//! `P(w)` for Gaussian `w`.

mod covariance;
mod feature;
mod moments;
mod multi_index;

pub use covariance::{
    covariance_analytic, covariance_empirical, paper_delta, paper_delta_log, quadratic_opnorm_audit,
    sigma_upper_bound_log_rhs, sigma_upper_bound_rhs, spectrum, split_spectrum, symmetric_spectrum,
    truncate_spectrum, CovarianceOperator, Provenance, SpectralSplit, Spectrum, COVARIANCE_BLOCK,
    SYMMETRY_TOLERANCE,
};
pub use feature::{embed_point, q_form, FeatureMap, FeatureVector};
pub use moments::{
    coefficient_norm_sq, gaussian_moment, poly_mul, polynomial_mean, polynomial_variance_derivative_expansion,
    polynomial_variance_moments, sharpness_polynomial, variance_expansion_terms, MultiPoly,
};
pub use multi_index::{level_size, multi_indices, multi_indices_capped, FeatureBasis, MultiIndex};
