use serde::{Deserialize, Serialize};

use super::aggregate::median_aggregate;
use super::dataset::Dataset;
use super::dsr::{dsr_crossfit, dsr_nocrossfit};
use super::gsem::{fit_gsem, fit_spatialplus, Smoother, SpatialPlusOptions, DEFAULT_BOOTSTRAP};
use super::lmm::fit_lmm;
use super::ols::{fit_ols, OlsOptions};
use super::result::EstimateResult;
use super::theory::dsr_theoretical;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Scalar};
use crate::smoothers::{GpOptions, TauMode};

pub const DEFAULT_FOLDS: usize = 5;

/// Kriging options used by the GP-based methods unless overridden: the
/// Matérn smoothness is profiled over the half-integers.
pub fn default_gp() -> GpOptions {
    GpOptions { tau_mode: TauMode::Profile, ..GpOptions::default() }
}

/// An estimator together with its options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodSpec {
    Ols { robust: bool },
    Lmm { gp: GpOptions },
    Gsem { smoother: Smoother, bootstrap_b: usize },
    Spatialplus { options: SpatialPlusOptions, bootstrap_b: usize },
    Dsr { folds: usize, gp: GpOptions, runs: usize },
    DsrNocrossfit { gp: GpOptions },
    DsrTheory { folds: usize, runs: usize },
}

impl MethodSpec {
    /// Default options for a method identifier.
    pub fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "ols" => MethodSpec::Ols { robust: false },
            "lmm" => MethodSpec::Lmm { gp: default_gp() },
            "gsem" => MethodSpec::Gsem { smoother: Smoother::default(), bootstrap_b: DEFAULT_BOOTSTRAP },
            "spatialplus" => MethodSpec::Spatialplus {
                options: SpatialPlusOptions::default(),
                bootstrap_b: DEFAULT_BOOTSTRAP,
            },
            "dsr" => MethodSpec::Dsr { folds: DEFAULT_FOLDS, gp: default_gp(), runs: 1 },
            "dsr-nocrossfit" => MethodSpec::DsrNocrossfit { gp: default_gp() },
            "dsr-theory" => MethodSpec::DsrTheory { folds: DEFAULT_FOLDS, runs: 1 },
            _ => return None,
        })
    }

    pub const IDS: [&'static str; 7] =
        ["ols", "lmm", "gsem", "spatialplus", "dsr", "dsr-nocrossfit", "dsr-theory"];

    pub fn id(&self) -> &'static str {
        match self {
            MethodSpec::Ols { .. } => "ols",
            MethodSpec::Lmm { .. } => "lmm",
            MethodSpec::Gsem { .. } => "gsem",
            MethodSpec::Spatialplus { .. } => "spatialplus",
            MethodSpec::Dsr { .. } => "dsr",
            MethodSpec::DsrNocrossfit { .. } => "dsr-nocrossfit",
            MethodSpec::DsrTheory { .. } => "dsr-theory",
        }
    }

    /// Label for report tables.
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Ols { .. } => "OLS",
            MethodSpec::Lmm { .. } => "LMM",
            MethodSpec::Gsem { .. } => "gSEM",
            MethodSpec::Spatialplus { .. } => "Spatial+",
            MethodSpec::Dsr { .. } => "DSR",
            MethodSpec::DsrNocrossfit { .. } => "DSR (no crossfit)",
            MethodSpec::DsrTheory { .. } => "DSR (theory)",
        }
    }
}

fn repeated<T: Scalar>(
    runs: usize,
    rng: &RngStream,
    mut once: impl FnMut(&mut RngStream) -> Result<EstimateResult<T>>,
) -> Result<EstimateResult<T>> {
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be at least 1".into()));
    }
    let results = (0..runs)
        .map(|r| {
            let mut stream = if r == 0 { rng.clone() } else { rng.substream(r as u64) };
            once(&mut stream)
        })
        .collect::<Result<Vec<_>>>()?;
    median_aggregate(&results)
}

/// Runs the estimator described by `spec`. Random splits and bootstrap
/// draws come from `rng`; repeated runs `r > 0` use `rng.substream(r)`.
pub fn fit_method<T: Scalar>(
    spec: &MethodSpec,
    data: &Dataset<T>,
    level: f64,
    rng: &RngStream,
) -> Result<EstimateResult<T>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::DomainError(format!("confidence level must be in (0, 1), got {level}")));
    }
    match spec {
        MethodSpec::Ols { robust } => fit_ols(data, OlsOptions { robust: *robust, intercept: true }, level),
        MethodSpec::Lmm { gp } => fit_lmm(data, gp, level),
        MethodSpec::Gsem { smoother, bootstrap_b } => fit_gsem(data, smoother, *bootstrap_b, level, rng),
        MethodSpec::Spatialplus { options, bootstrap_b } => {
            fit_spatialplus(data, options, *bootstrap_b, level, rng)
        }
        MethodSpec::Dsr { folds, gp, runs } => repeated(*runs, rng, |r| dsr_crossfit(data, *folds, gp, level, r)),
        MethodSpec::DsrNocrossfit { gp } => dsr_nocrossfit(data, gp, level),
        MethodSpec::DsrTheory { folds, runs } => repeated(*runs, rng, |r| dsr_theoretical(data, *folds, level, r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;

    #[test]
    fn ids_round_trip() {
        for id in MethodSpec::IDS {
            assert_eq!(MethodSpec::from_id(id).unwrap().id(), id);
        }
        assert!(MethodSpec::from_id("bart").is_none());
    }

    #[test]
    fn single_run_equals_direct_call() {
        let mut g = RngStream::new(31, 0);
        let n = 60;
        let s = Mat::from_fn(n, 2, |_, _| g.uniform());
        let a = Mat::from_fn(n, 1, |i, _| s[(i, 0)] + 0.3 * g.normal());
        let y = (0..n).map(|i| a[(i, 0)] + s[(i, 1)] + 0.2 * g.normal()).collect();
        let d = Dataset::without_covariates(y, a, s).unwrap();
        let rng = RngStream::new(7, 3);
        let spec = MethodSpec::DsrTheory { folds: 3, runs: 1 };
        let r = fit_method(&spec, &d, 0.95, &rng).unwrap();
        let direct = dsr_theoretical(&d, 3, 0.95, &mut rng.clone()).unwrap();
        assert_eq!(r, direct);
        let three = fit_method(&MethodSpec::DsrTheory { folds: 3, runs: 3 }, &d, 0.95, &rng).unwrap();
        assert!(three.beta_hat[0].is_finite());
        assert!(fit_method(&spec, &d, 1.5, &rng).is_err());
    }
}
