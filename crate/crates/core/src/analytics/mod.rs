//! Deterministic covariance numerics for the process and its partial sums.

mod covariance;
mod integral;
mod limit;
mod partial_sums;

pub use covariance::{
    classify_summability, cross_covariance_asymptotic, cross_covariance_exact, l2_membership,
    lag_series, Asymptotic, AsymptoticRegime, L2Membership, SeriesValue, Summability,
    L2_OVERFLOW_THRESHOLD,
};
pub use integral::{c_integral, c_integral_with, c_upper_bound};
pub use limit::{
    boundary_constant, dominating_bound, dominating_bound_with_constant, limit_kernel,
    normalization_factor, normalization_plan, unit_exponent_normalized_variances, LimitKernel,
    NormalizationPlan, BOUNDARY_SAFETY, BOUNDARY_SCAN_MAX_N,
};
pub use partial_sums::{
    coefficient_column, inner_product_sum, partial_sum_covariance_asymptotic,
    partial_sum_covariance_exact, partial_sum_covariance_matrix, partial_sum_series,
    past_product_series, past_tail_bound, past_weight, prefix_power_sums, required_past_cut,
    stationary_partial_sum_series, windowed_coefficient_sum, windowed_triple_sum, z_coefficients,
    CoefficientTable, PartialSumCovariance, CROSS_CHECK_MAX_N, CROSS_CHECK_REL_TOL,
};
