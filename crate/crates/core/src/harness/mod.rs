//! Experiment orchestration: configs, rate experiments, bound audits,
//! coefficient tables and their CSV reports.

mod audit;
mod coeffs;
pub mod commands;
mod config;
mod fit;
mod rate;

pub use audit::{
    kernel_identity_error, min_homogeneous_variance, random_multipoly, run_bound_audit, sharpness_slope, AuditReport,
    AuditRow, Relation, AUDIT_SLACK, KERNEL_IDENTITY_TOLERANCE, QUADRATIC_OPNORM_CEILING, SHARPNESS_SLOPE_TOLERANCE,
    VARIANCE_ORACLE_TOLERANCE,
};
pub use coeffs::{run_coefficient_table, CoefficientRow};
pub use config::{parse_config_text, parse_k_grid, ExperimentConfig, MAX_TABLE_DEGREE};
pub use fit::{fit_loglog_slope, RateFit, MIN_FIT_POINTS};
pub use rate::{applicable_bound, rate_pairs, run_rate_experiment, RateReport, RateRow};
