//! Sampling, reference quadrature and discrete/continuous norms.

mod gauss;
mod norms;
mod sampling;

pub use gauss::{composite, gauss_legendre, graded_breaks, legendre_and_derivative, over_breaks, GaussRule, MAX_ORDER};
pub use norms::{
    continuous_norm, discrete_norm, discrete_norm_values, fit_loglog_slope, integrate_refined, integrate_refined_with,
    mc_convergence_probe,
    pairwise_sum, Certified, McRow, QuadratureRule, Refine, REFINE_NODE_CAP, REFINE_RTOL,
};
pub use sampling::{
    boundary_atoms, derive_seed, grid_samples, sample_iid, stream_rng, AxisDensity, Density, SampleKind, SampleSet,
    SampleTarget,
};
