use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::result::EstimateResult;
use super::sandwich::sandwich_variance;
use crate::error::{Error, Result};
use crate::numerics::{dot, solve_checked, Mat, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsOptions {
    /// HC0 sandwich variance instead of `σ̂² (XᵀX)⁻¹`.
    pub robust: bool,
    pub intercept: bool,
}

impl Default for OlsOptions {
    fn default() -> Self {
        Self { robust: false, intercept: true }
    }
}

/// Least-squares coefficients, `(XᵀX)⁻¹` and residuals.
pub fn least_squares<T: Scalar>(x: &Mat<T>, y: &[T]) -> Result<(Vec<T>, Mat<T>, Vec<T>)> {
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("design has no columns".into()));
    }
    let (coef, inv) = solve_checked(&x.gram(), &x.tr_matvec(y)?, "least squares design")?;
    let resid: Vec<T> = (0..x.nrows()).map(|i| y[i] - dot(x.row(i), &coef)).collect();
    Ok((coef, inv, resid))
}

/// Regression of `y` on `[A Z 1]` (intercept optional).
pub fn fit_ols<T: Scalar>(data: &Dataset<T>, opts: OlsOptions, level: f64) -> Result<EstimateResult<T>> {
    data.validate()?;
    let mut x = data.a.hcat(&data.z)?;
    if opts.intercept {
        x = x.with_intercept();
    }
    let (n, p, l) = (data.n(), x.ncols(), data.n_treatments());
    let (coef, inv, resid) = least_squares(&x, &data.y)?;
    let full = if opts.robust {
        sandwich_variance(&x, &x, &resid)?
    } else {
        if n <= p {
            return Err(Error::RankDeficient(format!("n = {n} <= p = {p}")));
        }
        let s2 = resid.iter().map(|&e| e * e).sum::<T>() / T::from_usize_lossy(n - p);
        inv.scale(s2)
    };
    let idx: Vec<usize> = (0..l).collect();
    let var = full.select_rows(&idx).select_cols(&idx);
    let name = if opts.robust { "ols-robust" } else { "ols" };
    Ok(EstimateResult::normal(name, coef[..l].to_vec(), var, level, resid, data.a.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(a: &[f64], y: &[f64]) -> Dataset<f64> {
        let n = a.len();
        Dataset::without_covariates(y.to_vec(), Mat::column(a), Mat::zeros(n, 2)).unwrap()
    }

    #[test]
    fn hand_normal_equations() {
        let d = toy(&[1.0, 2.0], &[2.0, 4.0]);
        let r = fit_ols(&d, OlsOptions { robust: true, intercept: false }, 0.95).unwrap();
        assert!((r.beta_hat[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_fit() {
        let a = [0.3, -1.2, 2.5, 0.7, 1.1];
        let d = toy(&a, &a);
        let r = fit_ols(&d, OlsOptions::default(), 0.95).unwrap();
        assert!((r.beta_hat[0] - 1.0).abs() < 1e-12);
        assert!(r.residuals_u.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn duplicate_columns_rejected() {
        let a = Mat::<f64>::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [5.0, 5.0]]).unwrap();
        let d = Dataset::without_covariates(vec![1.0, 2.0, 3.0, 4.0], a, Mat::zeros(4, 2)).unwrap();
        assert!(matches!(fit_ols(&d, OlsOptions::default(), 0.95), Err(Error::RankDeficient(_))));
    }
}
