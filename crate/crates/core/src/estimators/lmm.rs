use super::dataset::Dataset;
use super::result::{Diagnostics, EstimateResult};
use crate::error::Result;
use crate::numerics::{dot, Mat, Scalar};
use crate::smoothers::{fit_gp_reml, krige_predict, GpFit, GpOptions};

/// Spatial linear mixed model `Y = Aβ + Zθ + GP + noise` with REML-fitted
/// covariance. The coefficient is the GLS slope; its variance is the
/// treatment block of `(XᵀΣ̂⁻¹X)⁻¹`.
pub fn fit_lmm<T: Scalar>(data: &Dataset<T>, gp: &GpOptions, level: f64) -> Result<EstimateResult<T>> {
    data.validate()?;
    let x = data.outcome_design();
    let fit = fit_gp_reml(&data.y, &x, &data.s, gp)?;
    lmm_from_fit(data, &x, &fit, level)
}

/// Mixed-model summary from an already fitted working model.
pub fn lmm_from_fit<T: Scalar>(
    data: &Dataset<T>,
    x: &Mat<T>,
    fit: &GpFit<T>,
    level: f64,
) -> Result<EstimateResult<T>> {
    let l = data.n_treatments();
    let cov = fit.slope_covariance()?;
    let idx: Vec<usize> = (0..l).collect();
    let var = cov.select_rows(&idx).select_cols(&idx).symmetrized();
    let trend = krige_predict(fit, &data.s, x)?;
    let resid: Vec<T> =
        (0..data.n()).map(|i| data.y[i] - dot(x.row(i), &fit.slope) - trend[i]).collect();
    let diag = Diagnostics {
        outcome_trend: trend,
        treatment_fit: None,
        notes: vec![format!(
            "gamma={} tau={} omega2={} sigma2={}",
            fit.spec.gamma, fit.spec.tau, fit.spec.omega2, fit.spec.sigma2
        )],
    };
    Ok(EstimateResult::normal("lmm", fit.slope[..l].to_vec(), var, level, resid, data.a.clone())
        .with_diagnostics(diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_ols, OlsOptions};
    use crate::kernels::KernelSpec;
    use crate::numerics::RngStream;
    use crate::smoothers::Criterion;

    #[test]
    fn zero_signal_equals_ols() {
        let mut rng = RngStream::new(41, 0);
        let n = 30;
        let s = Mat::from_fn(n, 2, |_, _| rng.uniform());
        let a = Mat::from_fn(n, 1, |_, _| rng.normal());
        let y: Vec<f64> = (0..n).map(|i| 0.7 * a[(i, 0)] + rng.normal()).collect();
        let d = Dataset::without_covariates(y, a, s).unwrap();
        let x = d.outcome_design();
        let spec = KernelSpec::matern(1.5, 0.2).with_variances(0.0, 2.0);
        let fit = GpFit::with_spec(spec, &d.y, &x, &d.s, Criterion::Reml).unwrap();
        let lmm = lmm_from_fit(&d, &x, &fit, 0.95).unwrap();
        let ols = fit_ols(&d, OlsOptions::default(), 0.95).unwrap();
        assert!((lmm.beta_hat[0] - ols.beta_hat[0]).abs() < 1e-8);
        assert!(lmm.var_hat[(0, 0)] >= 0.0);
    }
}
