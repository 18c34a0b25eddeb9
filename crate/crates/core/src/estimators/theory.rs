//! DSR variant used for the asymptotic theory: squared-exponential kernel
//! ridge predictors with train/validation tuning and clipping.

use super::dataset::{center_columns, centered, Dataset};
use super::folds::partition_folds;
use super::result::{Diagnostics, EstimateResult};
use super::sandwich::{bread, sandwich_variance};
use crate::error::{dim_err, Result};
use crate::numerics::{Mat, RngStream, Scalar};
use crate::smoothers::{clip_values, theoretical_krige, tv_grid_select};

/// Out-of-fold predictor for one regression on location.
pub trait TheoryPredictor<T: Scalar>: Sync {
    /// Predicts at `target` from `(source, response)`. `halves` indexes
    /// the training/validation split of the source rows; `n_full` sizes
    /// the tuning grid.
    fn predict(
        &self,
        source: &Mat<T>,
        response: &[T],
        halves: (&[usize], &[usize]),
        target: &Mat<T>,
        n_full: usize,
    ) -> Result<Vec<T>>;
}

/// Grid-tuned kernel ridge prediction, clipped to the range of the source
/// responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainValidation;

impl<T: Scalar> TheoryPredictor<T> for TrainValidation {
    fn predict(
        &self,
        source: &Mat<T>,
        response: &[T],
        halves: (&[usize], &[usize]),
        target: &Mat<T>,
        n_full: usize,
    ) -> Result<Vec<T>> {
        let (tr, va) = halves;
        let pick = |idx: &[usize]| -> Vec<T> { idx.iter().map(|&i| response[i]).collect() };
        let sel = tv_grid_select(&source.select_rows(tr), &pick(tr), &source.select_rows(va), &pick(va), n_full)?;
        let raw = theoretical_krige(target, source, response, sel.gamma_star, sel.lambda_star)?;
        let lo = response.iter().copied().fold(T::infinity(), T::min);
        let hi = response.iter().copied().fold(T::neg_infinity(), T::max);
        clip_values(&raw, lo, hi)
    }
}

/// Predicts zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroPredictor;

impl<T: Scalar> TheoryPredictor<T> for ZeroPredictor {
    fn predict(&self, _: &Mat<T>, _: &[T], _: (&[usize], &[usize]), target: &Mat<T>, _: usize) -> Result<Vec<T>> {
        Ok(vec![T::zero(); target.nrows()])
    }
}

/// Cross-fitted predictions of the centered response and of every column
/// of the centered regressor matrix `X = [A Z]`.
pub fn theory_nuisance<T: Scalar, P: TheoryPredictor<T>>(
    y: &[T],
    x: &Mat<T>,
    s: &Mat<T>,
    k: usize,
    predictor: &P,
    rng: &mut RngStream,
) -> Result<(Vec<T>, Mat<T>)> {
    let n = y.len();
    if x.nrows() != n || s.nrows() != n {
        return dim_err(format!("y has {n} rows, X {}, S {}", x.nrows(), s.nrows()));
    }
    let folds = partition_folds(n, k, rng)?;
    let mut h = vec![T::zero(); n];
    let mut xh = Mat::zeros(n, x.ncols());
    for f in 0..k {
        let rows = folds.members(f);
        let comp = folds.complement(f);
        let perm = rng.permutation(comp.len());
        let half = comp.len() / 2;
        let (tr, va) = perm.split_at(half);
        let src = s.select_rows(&comp);
        let tgt = s.select_rows(&rows);
        let yc: Vec<T> = comp.iter().map(|&i| y[i]).collect();
        let ph = predictor.predict(&src, &yc, (tr, va), &tgt, n)?;
        for (q, &i) in rows.iter().enumerate() {
            h[i] = ph[q];
        }
        for j in 0..x.ncols() {
            let col: Vec<T> = comp.iter().map(|&i| x[(i, j)]).collect();
            let pj = predictor.predict(&src, &col, (tr, va), &tgt, n)?;
            for (q, &i) in rows.iter().enumerate() {
                xh[(i, j)] = pj[q];
            }
        }
    }
    Ok((h, xh))
}

/// Theoretical DSR: `β̂ = (V̂ᵀV̂)⁻¹ V̂ᵀ(Y - ĥ)` with `V̂ = X - X̂`, variance
/// with bread `(V̂ᵀV̂)⁻¹`. Covariates enter as extra regressors; only the
/// treatment block is reported.
pub fn dsr_theoretical_with<T: Scalar, P: TheoryPredictor<T>>(
    data: &Dataset<T>,
    k: usize,
    predictor: &P,
    level: f64,
    rng: &mut RngStream,
) -> Result<EstimateResult<T>> {
    data.validate()?;
    let l = data.n_treatments();
    let y = centered(&data.y);
    let mut x = data.a.hcat(&data.z)?;
    center_columns(&mut x);
    let (h, xh) = theory_nuisance(&y, &x, &data.s, k, predictor, rng)?;
    let v = x.sub(&xh)?;
    let rhs: Vec<T> = y.iter().zip(&h).map(|(&a, &b)| a - b).collect();
    let beta = bread(&v, &v)?.matvec(&v.tr_matvec(&rhs)?)?;
    let fit = v.matvec(&beta)?;
    let u: Vec<T> = rhs.iter().zip(&fit).map(|(&r, &f)| r - f).collect();
    let var = sandwich_variance(&v, &v, &u)?;
    let idx: Vec<usize> = (0..l).collect();
    let diag = Diagnostics {
        outcome_trend: h,
        treatment_fit: Some(xh.select_cols(&idx)),
        notes: Vec::new(),
    };
    Ok(EstimateResult::normal(
        "dsr-theory",
        beta[..l].to_vec(),
        var.select_rows(&idx).select_cols(&idx),
        level,
        u,
        v.select_cols(&idx),
    )
    .with_diagnostics(diag))
}

pub fn dsr_theoretical<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    level: f64,
    rng: &mut RngStream,
) -> Result<EstimateResult<T>> {
    dsr_theoretical_with(data, k, &TrainValidation, level, rng)
}
