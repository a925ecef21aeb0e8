//! Closed-form and quadrature-based quantities for the three placements.

mod bounds;
mod estimators;
mod palm;
mod quad;

pub use bounds::{
    bernstein_violation, chernoff_violation, concave_surrogate, hit_rate, hit_variance, matii_hit_bounds,
    matii_hit_var_bound, multihop_gain, spatial_var_bound, BoundReport, Request,
};
pub use estimators::{empty_space_distances, ks_distance, pair_correlation_estimate, ripley_k_estimate};
pub use palm::{
    contact_from_palm, contact_indep, contact_matii, gec_intensity, gec_spatial_kernel_integral, mati_stats,
    matii_intensity, matii_radius_from_prob, palm_gec, palm_gec_nested, palm_matii, sopd_matii, weight_integral,
};
pub use quad::{integrate, mark_expectation, Estimate, QuadratureSpec};
