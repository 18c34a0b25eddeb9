use serde::{Deserialize, Serialize};

use crate::numerics::{two_sided_z, Mat, Scalar};

/// Fitted first-stage quantities kept for inspection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    /// Fitted outcome spatial trend (`ĝ(S)` or `ĥ(S)`), empty if unused.
    pub outcome_trend: Vec<T>,
    /// Fitted treatment models `Â`, one column per treatment.
    pub treatment_fit: Option<Mat<T>>,
    pub notes: Vec<String>,
}

/// Point estimate, variance and intervals for the treatment coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult<T> {
    pub method: String,
    pub beta_hat: Vec<T>,
    pub var_hat: Mat<T>,
    pub ci_lower: Vec<T>,
    pub ci_upper: Vec<T>,
    pub level: f64,
    /// Outcome residuals `Û`.
    pub residuals_u: Vec<T>,
    /// Treatment residuals `V̂` (n×ℓ).
    pub residuals_v: Mat<T>,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Scalar> EstimateResult<T> {
    /// Result with Wald intervals `β̂ ± z √diag(var)`.
    pub fn normal(
        method: impl Into<String>,
        beta_hat: Vec<T>,
        var_hat: Mat<T>,
        level: f64,
        residuals_u: Vec<T>,
        residuals_v: Mat<T>,
    ) -> Self {
        let (ci_lower, ci_upper) = wald_intervals(&beta_hat, &var_hat, level);
        Self {
            method: method.into(),
            beta_hat,
            var_hat,
            ci_lower,
            ci_upper,
            level,
            residuals_u,
            residuals_v,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn with_diagnostics(mut self, d: Diagnostics<T>) -> Self {
        self.diagnostics = d;
        self
    }

    pub fn se(&self) -> Vec<T> {
        self.var_hat.diag().into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
    }

    pub fn n_treatments(&self) -> usize {
        self.beta_hat.len()
    }
}

pub fn wald_intervals<T: Scalar>(beta: &[T], var: &Mat<T>, level: f64) -> (Vec<T>, Vec<T>) {
    let z = T::lit(two_sided_z(level));
    let half: Vec<T> = var.diag().into_iter().map(|v| z * v.max(T::zero()).sqrt()).collect();
    (
        beta.iter().zip(&half).map(|(&b, &h)| b - h).collect(),
        beta.iter().zip(&half).map(|(&b, &h)| b + h).collect(),
    )
}
