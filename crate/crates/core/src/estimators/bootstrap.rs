use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{quantile_sorted, Mat, RngStream, Scalar};

/// Percentile intervals and the successful bootstrap draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub draws: Vec<Vec<T>>,
    pub failures: usize,
}

impl<T: Scalar> BootstrapSummary<T> {
    /// Sample covariance of the draws.
    pub fn covariance(&self) -> Mat<T> {
        let l = self.lower.len();
        let b = self.draws.len();
        let mut mean = vec![T::zero(); l];
        for d in &self.draws {
            for (m, &v) in mean.iter_mut().zip(d) {
                *m += v;
            }
        }
        let bf = T::from_usize_lossy(b.max(1));
        for m in mean.iter_mut() {
            *m /= bf;
        }
        let mut cov = Mat::zeros(l, l);
        for d in &self.draws {
            for i in 0..l {
                for j in 0..l {
                    cov[(i, j)] += (d[i] - mean[i]) * (d[j] - mean[j]);
                }
            }
        }
        cov.scale(T::one() / T::from_usize_lossy(b.saturating_sub(1).max(1)))
    }
}

/// Nonparametric bootstrap with iid row resampling.
///
/// Replicate `b` draws its rows from `rng.substream(b)`, so the result does
/// not depend on scheduling. Fails when more than 20% of replicates error.
pub fn bootstrap_ci<T, F>(
    estimator: F,
    data: &Dataset<T>,
    b: usize,
    level: f64,
    rng: &RngStream,
) -> Result<BootstrapSummary<T>>
where
    T: Scalar,
    F: Fn(&Dataset<T>) -> Result<Vec<T>> + Sync,
{
    if b < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 bootstrap replicates, got {b}")));
    }
    let n = data.n();
    let results: Vec<Result<Vec<T>>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng.substream(rep as u64);
            let idx: Vec<usize> = (0..n).map(|_| r.below(n as u64) as usize).collect();
            estimator(&data.subset(&idx))
        })
        .collect();
    let draws: Vec<Vec<T>> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let failures = b - draws.len();
    if failures * 5 > b || draws.is_empty() {
        return Err(Error::BootstrapFailed { failed: failures, total: b });
    }
    let l = draws[0].len();
    let (plo, phi) = ((1.0 - level) / 2.0, 1.0 - (1.0 - level) / 2.0);
    let mut lower = Vec::with_capacity(l);
    let mut upper = Vec::with_capacity(l);
    for j in 0..l {
        let mut col: Vec<T> = draws.iter().map(|d| d[j]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        lower.push(quantile_sorted(&col, plo));
        upper.push(quantile_sorted(&col, phi));
    }
    Ok(BootstrapSummary { lower, upper, draws, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset<f64> {
        let mut rng = RngStream::new(51, 0);
        let n = 40;
        let a = Mat::from_fn(n, 1, |_, _| rng.normal());
        let y: Vec<f64> = (0..n).map(|i| a[(i, 0)] + rng.normal()).collect();
        Dataset::without_covariates(y, a, Mat::zeros(n, 2)).unwrap()
    }

    #[test]
    fn constant_estimator() {
        let s = bootstrap_ci(|_| Ok(vec![3.0]), &data(), 20, 0.95, &RngStream::new(1, 1)).unwrap();
        assert_eq!((s.lower[0], s.upper[0]), (3.0, 3.0));
    }

    #[test]
    fn percentile_definition_and_determinism() {
        let d = data();
        let mean_y = |x: &Dataset<f64>| Ok(vec![x.y.iter().sum::<f64>() / x.n() as f64]);
        let rng = RngStream::new(2, 7);
        let s1 = bootstrap_ci(mean_y, &d, 50, 0.95, &rng).unwrap();
        let s2 = bootstrap_ci(mean_y, &d, 50, 0.95, &rng).unwrap();
        assert_eq!(s1, s2);
        let mut col: Vec<f64> = s1.draws.iter().map(|v| v[0]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((s1.lower[0] - quantile_sorted(&col, 0.025)).abs() < 1e-12);
        assert!((s1.upper[0] - quantile_sorted(&col, 0.975)).abs() < 1e-12);
    }

    #[test]
    fn too_many_failures() {
        let d = data();
        let count = std::sync::atomic::AtomicUsize::new(0);
        let flaky = |_: &Dataset<f64>| {
            let c = count.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if c % 2 == 0 {
                Err(Error::DegenerateHat)
            } else {
                Ok(vec![1.0])
            }
        };
        assert!(matches!(
            bootstrap_ci(flaky, &d, 20, 0.95, &RngStream::new(0, 0)),
            Err(Error::BootstrapFailed { .. })
        ));
        assert!(bootstrap_ci(|_| Ok(vec![0.0]), &d, 5, 0.95, &RngStream::new(0, 0)).is_err());
    }
}
