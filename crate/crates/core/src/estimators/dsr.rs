//! Double spatial regression with cross-fitted Kriging nuisance models.

use rayon::prelude::*;

use super::dataset::Dataset;
use super::folds::{partition_folds, FoldAssignment};
use super::result::{Diagnostics, EstimateResult};
use super::sandwich::{bread, sandwich_variance};
use crate::error::{dim_err, Result};
use crate::kernels::KernelSpec;
use crate::numerics::{Mat, RngStream, Scalar};
use crate::smoothers::{fit_gp_reml, krige_predict, Criterion, GpFit, GpOptions};

/// Folds smaller than this trigger a warning.
pub const SMALL_FOLD: usize = 20;

/// First-stage predictions at the target rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisancePrediction<T> {
    /// Spatial trend of the outcome model, `ĝ(S)`.
    pub outcome_trend: Vec<T>,
    /// Covariate part of the outcome model, `[Z 1] θ̃`.
    pub outcome_offset: Vec<T>,
    /// `Â`, one column per treatment.
    pub regressor_fit: Mat<T>,
}

impl<T: Scalar> NuisancePrediction<T> {
    pub fn zeros(n: usize, l: usize) -> Self {
        Self {
            outcome_trend: vec![T::zero(); n],
            outcome_offset: vec![T::zero(); n],
            regressor_fit: Mat::zeros(n, l),
        }
    }

    fn scatter(&mut self, rows: &[usize], part: &NuisancePrediction<T>) {
        for (k, &i) in rows.iter().enumerate() {
            self.outcome_trend[i] = part.outcome_trend[k];
            self.outcome_offset[i] = part.outcome_offset[k];
            self.regressor_fit.row_mut(i).copy_from_slice(part.regressor_fit.row(k));
        }
    }
}

/// Fits the working models on `train` and predicts at the rows of `target`.
/// Implementations must not read `target.y` or `target.a`.
pub trait NuisanceLearner<T: Scalar>: Sync {
    fn fit_predict(&self, train: &Dataset<T>, target: &Dataset<T>) -> Result<NuisancePrediction<T>>;
}

fn outcome_parts<T: Scalar>(
    fit: &GpFit<T>,
    target: &Dataset<T>,
    l: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let x = target.outcome_design();
    let trend = krige_predict(fit, &target.s, &x)?;
    let offset = target.covariate_design().matvec(&fit.slope[l..])?;
    Ok((trend, offset))
}

/// REML-fitted universal Kriging for the outcome (mean `[A Z 1]`) and for
/// every treatment (mean `[Z 1]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrigingLearner {
    pub gp: GpOptions,
}

impl<T: Scalar> NuisanceLearner<T> for KrigingLearner {
    fn fit_predict(&self, train: &Dataset<T>, target: &Dataset<T>) -> Result<NuisancePrediction<T>> {
        let l = train.n_treatments();
        let yfit = fit_gp_reml(&train.y, &train.outcome_design(), &train.s, &self.gp)?;
        let (outcome_trend, outcome_offset) = outcome_parts(&yfit, target, l)?;
        let zc = train.covariate_design();
        let zt = target.covariate_design();
        let mut regressor_fit = Mat::zeros(target.n(), l);
        for j in 0..l {
            let f = fit_gp_reml(&train.a.col(j), &zc, &train.s, &self.gp)?;
            regressor_fit.set_col(j, &f.predict_mean(&target.s, &zt)?);
        }
        Ok(NuisancePrediction { outcome_trend, outcome_offset, regressor_fit })
    }
}

/// Kriging at fixed covariance parameters, one spec for the outcome and
/// one per treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedKrigingLearner<T> {
    pub outcome: KernelSpec<T>,
    pub treatments: Vec<KernelSpec<T>>,
}

impl<T: Scalar> NuisanceLearner<T> for FixedKrigingLearner<T> {
    fn fit_predict(&self, train: &Dataset<T>, target: &Dataset<T>) -> Result<NuisancePrediction<T>> {
        let l = train.n_treatments();
        if self.treatments.len() != l {
            return dim_err(format!("{} treatment specs for {l} treatments", self.treatments.len()));
        }
        let yfit = GpFit::with_spec(self.outcome, &train.y, &train.outcome_design(), &train.s, Criterion::Reml)?;
        let (outcome_trend, outcome_offset) = outcome_parts(&yfit, target, l)?;
        let zc = train.covariate_design();
        let zt = target.covariate_design();
        let mut regressor_fit = Mat::zeros(target.n(), l);
        for (j, spec) in self.treatments.iter().enumerate() {
            let f = GpFit::with_spec(*spec, &train.a.col(j), &zc, &train.s, Criterion::Reml)?;
            regressor_fit.set_col(j, &f.predict_mean(&target.s, &zt)?);
        }
        Ok(NuisancePrediction { outcome_trend, outcome_offset, regressor_fit })
    }
}

/// Predicts zero for every nuisance quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroLearner;

impl<T: Scalar> NuisanceLearner<T> for ZeroLearner {
    fn fit_predict(&self, train: &Dataset<T>, target: &Dataset<T>) -> Result<NuisancePrediction<T>> {
        Ok(NuisancePrediction::zeros(target.n(), train.n_treatments()))
    }
}

/// Out-of-fold predictions: rows of fold `k` come from models trained on
/// the other folds.
pub fn crossfit_nuisance<T: Scalar, L: NuisanceLearner<T>>(
    data: &Dataset<T>,
    folds: &FoldAssignment,
    learner: &L,
) -> Result<NuisancePrediction<T>> {
    let parts: Vec<Result<(Vec<usize>, NuisancePrediction<T>)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let rows = folds.members(f);
            let train = data.subset(&folds.complement(f));
            let pred = learner.fit_predict(&train, &data.subset(&rows))?;
            Ok((rows, pred))
        })
        .collect();
    let mut out = NuisancePrediction::zeros(data.n(), data.n_treatments());
    for p in parts {
        let (rows, pred) = p?;
        out.scatter(&rows, &pred);
    }
    Ok(out)
}

/// Final stage: `V̂ = A - Â`, `β̂ = (V̂ᵀA)⁻¹ V̂ᵀ(Y - Zθ̃ - ĝ)`, sandwich variance
/// with bread `(V̂ᵀA)⁻¹`.
pub fn dsr_final_stage<T: Scalar>(
    data: &Dataset<T>,
    pred: &NuisancePrediction<T>,
    level: f64,
    method: &str,
) -> Result<EstimateResult<T>> {
    let n = data.n();
    let v = data.a.sub(&pred.regressor_fit)?;
    if pred.outcome_trend.len() != n || pred.outcome_offset.len() != n {
        return dim_err(format!("nuisance predictions do not have {n} rows"));
    }
    let rhs: Vec<T> = (0..n).map(|i| data.y[i] - pred.outcome_offset[i] - pred.outcome_trend[i]).collect();
    let beta = bread(&v, &data.a)?.matvec(&v.tr_matvec(&rhs)?)?;
    let fitted = data.a.matvec(&beta)?;
    let u: Vec<T> = rhs.iter().zip(&fitted).map(|(&r, &f)| r - f).collect();
    let var = sandwich_variance(&v, &data.a, &u)?;
    let diag = Diagnostics {
        outcome_trend: pred.outcome_trend.clone(),
        treatment_fit: Some(pred.regressor_fit.clone()),
        notes: Vec::new(),
    };
    Ok(EstimateResult::normal(method, beta, var, level, u, v).with_diagnostics(diag))
}

/// Cross-fitted DSR with an arbitrary nuisance learner.
pub fn dsr_crossfit_with<T: Scalar, L: NuisanceLearner<T>>(
    data: &Dataset<T>,
    k: usize,
    learner: &L,
    level: f64,
    rng: &mut RngStream,
) -> Result<EstimateResult<T>> {
    data.validate()?;
    let folds = partition_folds(data.n(), k, rng)?;
    if data.n() / k < SMALL_FOLD {
        log::warn!("folds have about {} observations, fewer than {SMALL_FOLD}", data.n() / k);
    }
    let pred = crossfit_nuisance(data, &folds, learner)?;
    dsr_final_stage(data, &pred, level, "dsr")
}

/// Cross-fitted DSR with REML Kriging working models.
pub fn dsr_crossfit<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    gp: &GpOptions,
    level: f64,
    rng: &mut RngStream,
) -> Result<EstimateResult<T>> {
    dsr_crossfit_with(data, k, &KrigingLearner { gp: *gp }, level, rng)
}

/// DSR with in-sample first-stage predictions.
pub fn dsr_nocrossfit_with<T: Scalar, L: NuisanceLearner<T>>(
    data: &Dataset<T>,
    learner: &L,
    level: f64,
) -> Result<EstimateResult<T>> {
    data.validate()?;
    let pred = learner.fit_predict(data, data)?;
    dsr_final_stage(data, &pred, level, "dsr-nocrossfit")
}

pub fn dsr_nocrossfit<T: Scalar>(data: &Dataset<T>, gp: &GpOptions, level: f64) -> Result<EstimateResult<T>> {
    dsr_nocrossfit_with(data, &KrigingLearner { gp: *gp }, level)
}
