//! Reconstruction: the unrolled denoise + data-consistency cascade, the
//! reference proximal-gradient solver and weight grid search.

mod cascade;
mod config;
mod denoise;
mod gridsearch;
mod proxgrad;
mod tv;

pub use cascade::{cascade_recon, cascade_recon_multicoil, data_consistency, zero_filled};
pub use config::{DenoiserSpec, ReconConfig, SliceMode};
pub use denoise::denoise;
pub use gridsearch::{grid_search_weights, GridRow, GridSearchResult, ValidationCase};
pub use proxgrad::{
    fixed_point_residual, objective, prox_gradient_solve, prox_gradient_step, temporal_tv_penalty, ProxGradResult,
};
pub use tv::{total_variation, tv_objective, tv_prox_1d};
