//! Squared-exponential Kriging with hyperparameters chosen on a
//! training/validation split.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::kernels::{distance, KernelSpec};
use crate::numerics::{cholesky, dot, JitterPolicy, Mat, Scalar, SymmetricEigen};

/// Selected `(λ, γ)` and the validation error that chose them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvSelection<T> {
    pub lambda_star: T,
    pub gamma_star: T,
    pub validation_mse: T,
}

/// Grid sizes `(⌈n/2⌉, ⌈√n/2⌉)` for the ridge and range parameters.
pub fn tv_grid_sizes(n_full: usize) -> Result<(usize, usize)> {
    if n_full < 2 {
        return Err(Error::EmptyGrid(n_full));
    }
    let n_lambda = n_full.div_ceil(2);
    let n_gamma = ((n_full as f64).sqrt() / 2.0).ceil() as usize;
    Ok((n_lambda, n_gamma.max(1)))
}

fn even_grid<T: Scalar>(m: usize) -> Vec<T> {
    (1..=m).map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(m)).collect()
}

/// Evenly spaced `(λ, γ)` grids in `(0, 1]`.
pub fn tv_grid<T: Scalar>(n_full: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (a, b) = tv_grid_sizes(n_full)?;
    Ok((even_grid(a), even_grid(b)))
}

/// Argmin over `(λ, γ, mse)` candidates, ties going to smaller `λ` and then
/// smaller `γ`.
pub fn select_min<T: Scalar>(candidates: &[(T, T, T)]) -> Option<TvSelection<T>> {
    let mut best: Option<(T, T, T)> = None;
    for &(l, g, m) in candidates {
        if !m.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bl, bg, bm)) => m < bm || (m == bm && (l < bl || (l == bl && g < bg))),
        };
        if better {
            best = Some((l, g, m));
        }
    }
    best.map(|(lambda_star, gamma_star, validation_mse)| TvSelection {
        lambda_star,
        gamma_star,
        validation_mse,
    })
}

fn sqexp_matrix<T: Scalar>(a: &Mat<T>, b: &Mat<T>, gamma: T) -> Mat<T> {
    let c = KernelSpec::sqexp(gamma).evaluator().expect("positive range");
    Mat::from_fn(a.nrows(), b.nrows(), |i, j| c.eval(distance(a.row(i), b.row(j))))
}

/// Validation MSE for every `(λ, γ)` pair on the grid of size `n_full`.
///
/// One eigendecomposition of the training correlation per `γ` serves all
/// `λ` values.
pub fn tv_grid_scores<T: Scalar>(
    train_locations: &Mat<T>,
    train_response: &[T],
    valid_locations: &Mat<T>,
    valid_response: &[T],
    n_full: usize,
) -> Result<Vec<(T, T, T)>> {
    let nt = train_locations.nrows();
    let nv = valid_locations.nrows();
    if nt == 0 || nv == 0 {
        return Err(Error::EmptyInput("training/validation half".into()));
    }
    if train_response.len() != nt || valid_response.len() != nv {
        return dim_err("training/validation responses do not match locations".to_string());
    }
    if train_locations.ncols() != valid_locations.ncols() {
        return dim_err("training/validation location dimensions differ".to_string());
    }
    let (lambdas, gammas) = tv_grid::<T>(n_full)?;
    let ntf = T::from_usize_lossy(nt);
    let nvf = T::from_usize_lossy(nv);
    let mut out = Vec::with_capacity(lambdas.len() * gammas.len());
    let mut coef = vec![T::zero(); nt];
    for &g in &gammas {
        let ctt = sqexp_matrix(train_locations, train_locations, g);
        let eig = SymmetricEigen::new(&ctt)?;
        let cvt = sqexp_matrix(valid_locations, train_locations, g);
        let b = cvt.matmul(&eig.vectors)?;
        let w = eig.vectors.tr_matvec(train_response)?;
        for &l in &lambdas {
            let nug = ntf * l;
            for k in 0..nt {
                coef[k] = w[k] / (eig.values[k].max(T::zero()) + nug);
            }
            let mut sse = T::zero();
            for i in 0..nv {
                let r = valid_response[i] - dot(b.row(i), &coef);
                sse += r * r;
            }
            out.push((l, g, sse / nvf));
        }
    }
    Ok(out)
}

/// Chooses `(λ, γ)` by fitting on the training half and scoring on the
/// validation half.
pub fn tv_grid_select<T: Scalar>(
    train_locations: &Mat<T>,
    train_response: &[T],
    valid_locations: &Mat<T>,
    valid_response: &[T],
    n_full: usize,
) -> Result<TvSelection<T>> {
    let scores =
        tv_grid_scores(train_locations, train_response, valid_locations, valid_response, n_full)?;
    select_min(&scores).ok_or_else(|| Error::EmptyInput("no finite validation error".into()))
}

/// `C_γ(T, S) (C_γ(S, S) + n λ I)⁻¹ y` with `n` the number of sources.
pub fn theoretical_krige<T: Scalar>(
    target_locations: &Mat<T>,
    source_locations: &Mat<T>,
    source_response: &[T],
    gamma: T,
    lambda: T,
) -> Result<Vec<T>> {
    let n = source_locations.nrows();
    if source_response.len() != n {
        return dim_err(format!("{} responses for {n} sources", source_response.len()));
    }
    if target_locations.ncols() != source_locations.ncols() {
        return dim_err("target/source location dimensions differ".to_string());
    }
    if !(gamma > T::zero()) || !(lambda >= T::zero()) {
        return Err(Error::DomainError(format!("need gamma > 0 and lambda >= 0, got {gamma}, {lambda}")));
    }
    let mut css = sqexp_matrix(source_locations, source_locations, gamma);
    css.add_diag(T::from_usize_lossy(n) * lambda);
    let policy = if lambda == T::zero() { JitterPolicy::none() } else { JitterPolicy::default() };
    let f = cholesky(&css, policy)?;
    let alpha = f.solve_vec(source_response)?;
    let cts = sqexp_matrix(target_locations, source_locations, gamma);
    cts.matvec(&alpha)
}

/// Element-wise clamp to `[lo, hi]`.
pub fn clip_values<T: Scalar>(v: &[T], lo: T, hi: T) -> Result<Vec<T>> {
    if lo > hi {
        return Err(Error::BoundsInverted { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok(v.iter().map(|&x| x.max(lo).min(hi)).collect())
}
