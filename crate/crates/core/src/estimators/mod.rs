//! Treatment-effect estimators under spatial confounding.

mod aggregate;
mod bootstrap;
mod dataset;
mod dsr;
mod folds;
mod gsem;
mod lmm;
mod method;
mod ols;
mod result;
mod sandwich;
mod theory;

pub use aggregate::median_aggregate;
pub use bootstrap::{bootstrap_ci, BootstrapSummary};
pub use dataset::{center_columns, centered, Dataset};
pub use dsr::{
    crossfit_nuisance, dsr_crossfit, dsr_crossfit_with, dsr_final_stage, dsr_nocrossfit,
    dsr_nocrossfit_with, FixedKrigingLearner, KrigingLearner, NuisanceLearner, NuisancePrediction,
    ZeroLearner, SMALL_FOLD,
};
pub use folds::{partition_folds, FoldAssignment};
pub use gsem::{
    fit_gsem, fit_spatialplus, gsem_point, spatialplus_point, spatialplus_point_with_basis,
    Smoother, SpatialPlusOptions, DEFAULT_BOOTSTRAP,
};
pub use lmm::{fit_lmm, lmm_from_fit};
pub use method::{default_gp, fit_method, MethodSpec, DEFAULT_FOLDS};
pub use ols::{fit_ols, least_squares, OlsOptions};
pub use result::{wald_intervals, Diagnostics, EstimateResult};
pub use sandwich::{bread, meat, sandwich_variance};
pub use theory::{dsr_theoretical, dsr_theoretical_with, theory_nuisance, TheoryPredictor, TrainValidation, ZeroPredictor};
