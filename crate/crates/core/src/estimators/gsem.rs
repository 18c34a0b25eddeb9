use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_ci;
use super::dataset::Dataset;
use super::ols::least_squares;
use super::result::{Diagnostics, EstimateResult};
use crate::error::{Error, Result};
use crate::numerics::{Mat, RngStream, Scalar};
use crate::smoothers::{
    default_lambda_grid, fit_gp_reml, fit_penalized_gcv, spline_design, spline_penalty_mask,
    GpOptions, SplineSmoother,
};

pub const DEFAULT_BOOTSTRAP: usize = 100;
const MIN_N: usize = 20;

/// First-stage regression of a variable on location alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoother {
    Spline(SplineSmoother),
    Gp(GpOptions),
    /// Predicts zero everywhere.
    Zero,
}

impl Default for Smoother {
    fn default() -> Self {
        Smoother::Spline(SplineSmoother::default())
    }
}

impl Smoother {
    /// In-sample fitted values for every column of `responses`.
    pub fn fit_columns<T: Scalar>(&self, responses: &Mat<T>, locations: &Mat<T>) -> Result<Mat<T>> {
        let (n, p) = (responses.nrows(), responses.ncols());
        let mut out = Mat::zeros(n, p);
        match self {
            Smoother::Zero => {}
            Smoother::Spline(sm) => {
                let knots = sm.knots_for(locations);
                let design = spline_design(locations, &knots)?;
                let mask = spline_penalty_mask(knots.nrows(), locations.ncols());
                let grid = default_lambda_grid(n);
                for j in 0..p {
                    let f = fit_penalized_gcv(&responses.col(j), &design, &mask, &grid)?;
                    out.set_col(j, &f.fitted);
                }
            }
            Smoother::Gp(opts) => {
                let ones = Mat::from_fn(n, 1, |_, _| T::one());
                for j in 0..p {
                    let f = fit_gp_reml(&responses.col(j), &ones, locations, opts)?;
                    out.set_col(j, &f.predict_mean(locations, &ones)?);
                }
            }
        }
        Ok(out)
    }

    /// `responses - fitted`.
    pub fn residualize<T: Scalar>(&self, responses: &Mat<T>, locations: &Mat<T>) -> Result<Mat<T>> {
        responses.sub(&self.fit_columns(responses, locations)?)
    }
}

fn check_size<T: Scalar>(data: &Dataset<T>) -> Result<()> {
    data.validate()?;
    if data.n() < MIN_N {
        return Err(Error::InvalidInput(format!("need at least {MIN_N} observations, got {}", data.n())));
    }
    Ok(())
}

struct TwoStage<T> {
    beta: Vec<T>,
    outcome_fit: Vec<T>,
    resid_u: Vec<T>,
    resid_v: Mat<T>,
}

fn gsem_stages<T: Scalar>(data: &Dataset<T>, smoother: &Smoother) -> Result<TwoStage<T>> {
    let l = data.n_treatments();
    let stacked = Mat::column(&data.y).hcat(&data.a)?.hcat(&data.z)?;
    let fitted = smoother.fit_columns(&stacked, &data.s)?;
    let resid = stacked.sub(&fitted)?;
    let cols: Vec<usize> = (1..stacked.ncols()).collect();
    let x = resid.select_cols(&cols).with_intercept();
    let (coef, _, u) = least_squares(&x, &resid.col(0))?;
    let va: Vec<usize> = (0..l).collect();
    Ok(TwoStage {
        beta: coef[..l].to_vec(),
        outcome_fit: fitted.col(0),
        resid_u: u,
        resid_v: x.select_cols(&va),
    })
}

/// Point estimate of the two-stage spatial residual regression.
pub fn gsem_point<T: Scalar>(data: &Dataset<T>, smoother: &Smoother) -> Result<Vec<T>> {
    Ok(gsem_stages(data, smoother)?.beta)
}

/// Geoadditive structural equation model: residualize `Y`, every treatment
/// and every covariate on location, then regress residuals on residuals.
/// Intervals are bootstrap percentiles, `var_hat` the bootstrap covariance.
pub fn fit_gsem<T: Scalar>(
    data: &Dataset<T>,
    smoother: &Smoother,
    bootstrap_b: usize,
    level: f64,
    rng: &RngStream,
) -> Result<EstimateResult<T>> {
    check_size(data)?;
    let st = gsem_stages(data, smoother)?;
    let boot = bootstrap_ci(|d| gsem_point(d, smoother), data, bootstrap_b, level, rng)?;
    Ok(EstimateResult {
        method: "gsem".into(),
        beta_hat: st.beta,
        var_hat: boot.covariance(),
        ci_lower: boot.lower,
        ci_upper: boot.upper,
        level,
        residuals_u: st.resid_u,
        residuals_v: st.resid_v,
        diagnostics: Diagnostics {
            outcome_trend: st.outcome_fit,
            treatment_fit: None,
            notes: vec![format!("{} bootstrap failures of {bootstrap_b}", boot.failures)],
        },
    })
}

/// Options for the Spatial+ comparator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialPlusOptions {
    /// Smoother removing the spatial surface from each treatment.
    pub treatment_smoother: Smoother,
    /// Knots of the spatial spline term in the outcome regression.
    pub knots: usize,
}

impl Default for SpatialPlusOptions {
    fn default() -> Self {
        Self { treatment_smoother: Smoother::default(), knots: SplineSmoother::default().knots }
    }
}

/// Spatial+ with an explicit spatial basis (radial columns penalized per
/// `penalized`, any other basis columns free).
pub fn spatialplus_point_with_basis<T: Scalar>(
    data: &Dataset<T>,
    treatment_smoother: &Smoother,
    basis: &Mat<T>,
    penalized: &[bool],
) -> Result<(Vec<T>, Vec<T>, Mat<T>)> {
    let l = data.n_treatments();
    let ra = treatment_smoother.residualize(&data.a, &data.s)?;
    let design = ra.hcat(&data.z)?.hcat(basis)?;
    let mut mask = vec![false; l + data.n_covariates()];
    mask.extend_from_slice(penalized);
    let fit = fit_penalized_gcv(&data.y, &design, &mask, &default_lambda_grid(data.n()))?;
    let u = fit.residuals(&data.y);
    Ok((fit.coefficients[..l].to_vec(), u, ra))
}

fn spatialplus_parts<T: Scalar>(
    data: &Dataset<T>,
    opts: &SpatialPlusOptions,
) -> Result<(Vec<T>, Vec<T>, Mat<T>)> {
    let sm = SplineSmoother { knots: opts.knots };
    let knots = sm.knots_for(&data.s);
    let basis = spline_design(&data.s, &knots)?;
    let mask = spline_penalty_mask(knots.nrows(), data.s.ncols());
    spatialplus_point_with_basis(data, &opts.treatment_smoother, &basis, &mask)
}

pub fn spatialplus_point<T: Scalar>(data: &Dataset<T>, opts: &SpatialPlusOptions) -> Result<Vec<T>> {
    Ok(spatialplus_parts(data, opts)?.0)
}

/// Spatial+: remove a fitted spatial surface from each treatment, then fit
/// `Y` on the treatment residuals plus a penalized thin-plate spline in
/// location. Bootstrap variance as in [`fit_gsem`].
pub fn fit_spatialplus<T: Scalar>(
    data: &Dataset<T>,
    opts: &SpatialPlusOptions,
    bootstrap_b: usize,
    level: f64,
    rng: &RngStream,
) -> Result<EstimateResult<T>> {
    check_size(data)?;
    let (beta, u, ra) = spatialplus_parts(data, opts)?;
    let boot = bootstrap_ci(|d| spatialplus_point(d, opts), data, bootstrap_b, level, rng)?;
    Ok(EstimateResult {
        method: "spatialplus".into(),
        beta_hat: beta,
        var_hat: boot.covariance(),
        ci_lower: boot.lower,
        ci_upper: boot.upper,
        level,
        residuals_u: u,
        residuals_v: ra,
        diagnostics: Diagnostics {
            notes: vec![format!("{} bootstrap failures of {bootstrap_b}", boot.failures)],
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_ols, OlsOptions};
    use crate::numerics::mean;

    fn data(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = RngStream::new(seed, 0);
        let s = Mat::from_fn(n, 2, |_, _| rng.uniform());
        let a = Mat::from_fn(n, 1, |i, _| (3.0 * s[(i, 0)]).sin() + 0.3 * rng.normal());
        let z = Mat::from_fn(n, 1, |_, _| rng.normal());
        let y = (0..n)
            .map(|i| 0.5 * a[(i, 0)] - 0.2 * z[(i, 0)] + (2.0 * s[(i, 1)]).cos() + 0.2 * rng.normal())
            .collect();
        Dataset::new(y, a, z, s).unwrap()
    }

    #[test]
    fn zero_smoother_is_ols() {
        let d = data(40, 3);
        let g = gsem_point(&d, &Smoother::Zero).unwrap();
        let o = fit_ols(&d, OlsOptions::default(), 0.95).unwrap();
        assert!((g[0] - o.beta_hat[0]).abs() < 1e-10);
    }

    #[test]
    fn spline_residuals_are_centered() {
        let d = data(60, 4);
        let m = Mat::column(&d.y).hcat(&d.a).unwrap();
        let r = Smoother::Spline(SplineSmoother { knots: 20 }).residualize(&m, &d.s).unwrap();
        for j in 0..2 {
            assert!(mean(&r.col(j)).abs() < 1e-9);
        }
    }

    #[test]
    fn gsem_bootstrap_brackets_estimate() {
        let d = data(60, 5);
        let sm = Smoother::Spline(SplineSmoother { knots: 20 });
        let r = fit_gsem(&d, &sm, 20, 0.95, &RngStream::new(9, 0)).unwrap();
        assert!(r.ci_lower[0] <= r.ci_upper[0]);
        assert!(r.var_hat[(0, 0)] > 0.0);
        assert!(fit_gsem(&d.subset(&(0..10).collect::<Vec<_>>()), &sm, 20, 0.95, &RngStream::new(9, 0)).is_err());
    }

    #[test]
    fn spatialplus_without_basis_regresses_on_residuals() {
        let d = data(50, 6);
        let sm = Smoother::Spline(SplineSmoother { knots: 15 });
        let empty = Mat::zeros(d.n(), 0);
        let (b, _, ra) = spatialplus_point_with_basis(&d, &sm, &empty, &[]).unwrap();
        let (coef, _, _) = least_squares(&ra.hcat(&d.z).unwrap(), &d.y).unwrap();
        assert!((b[0] - coef[0]).abs() < 1e-10);
    }

    #[test]
    fn spatialplus_identity_residualization() {
        let d = data(50, 7);
        let knots = SplineSmoother { knots: 15 }.knots_for(&d.s);
        let basis = spline_design(&d.s, &knots).unwrap();
        let mask = spline_penalty_mask(knots.nrows(), 2);
        let (b, _, _) = spatialplus_point_with_basis(&d, &Smoother::Zero, &basis, &mask).unwrap();
        let design = d.a.hcat(&d.z).unwrap().hcat(&basis).unwrap();
        let mut full_mask = vec![false, false];
        full_mask.extend_from_slice(&mask);
        let f = fit_penalized_gcv(&d.y, &design, &full_mask, &default_lambda_grid(d.n())).unwrap();
        assert!((b[0] - f.coefficients[0]).abs() < 1e-12);
    }
}
