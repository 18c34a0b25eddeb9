//! Nonparametric spatial regression engines: universal Kriging, the
//! squared-exponential training/validation predictor and a penalized
//! thin-plate spline smoother.

mod gp;
mod spline;
mod tv;

pub use gp::{fit_gp_reml, krige_predict, profile_loglik, Criterion, GpFit, GpOptions, TauMode};
pub use spline::{
    default_lambda_grid, fit_penalized_gcv, fit_spline_gcv, gcv_score, select_knots,
    spline_design, spline_penalty_mask, spline_predict, tps_radial, PenalizedFit, SplineFit,
    SplineSmoother, DEFAULT_KNOTS,
};
pub use tv::{
    clip_values, select_min, theoretical_krige, tv_grid, tv_grid_scores, tv_grid_select,
    tv_grid_sizes, TvSelection,
};
