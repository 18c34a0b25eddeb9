use super::result::{wald_intervals, EstimateResult};
use crate::error::{dim_err, Error, Result};
use crate::numerics::{median, Mat, Scalar};

/// Marginal (entry-wise) median of point estimates and variance entries
/// across repeated random-split runs, with intervals rebuilt from the
/// medians. Residuals and diagnostics come from the first run.
pub fn median_aggregate<T: Scalar>(runs: &[EstimateResult<T>]) -> Result<EstimateResult<T>> {
    let first = runs.first().ok_or_else(|| Error::EmptyInput("no runs to aggregate".into()))?;
    if runs.len() == 1 {
        return Ok(first.clone());
    }
    let l = first.n_treatments();
    if runs.iter().any(|r| r.n_treatments() != l) {
        return dim_err("runs disagree on the number of treatments".to_string());
    }
    let beta: Vec<T> = (0..l).map(|j| median(&runs.iter().map(|r| r.beta_hat[j]).collect::<Vec<_>>())).collect();
    let var = Mat::from_fn(l, l, |a, b| median(&runs.iter().map(|r| r.var_hat[(a, b)]).collect::<Vec<_>>()))
        .symmetrized();
    let (lo, hi) = wald_intervals(&beta, &var, first.level);
    let mut out = first.clone();
    out.beta_hat = beta;
    out.var_hat = var;
    out.ci_lower = lo;
    out.ci_upper = hi;
    out.diagnostics.notes.push(format!("median of {} runs", runs.len()));
    Ok(out)
}
