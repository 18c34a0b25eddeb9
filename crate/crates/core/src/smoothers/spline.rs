//! Penalized thin-plate regression splines with GCV smoothing selection.
//!
//! The basis is `r² log r` radial functions centred on knots plus affine
//! terms. Only the radial coefficients are shrunk (ridge penalty). The
//! unpenalized columns are projected out first, and the remaining ridge
//! problem is diagonalized once so that every grid value is cheap.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::kernels::distance;
use crate::numerics::{cholesky, dot, JitterPolicy, Mat, Scalar, SymmetricEigen};

/// Number of knots used when none is configured.
pub const DEFAULT_KNOTS: usize = 100;

/// `r² log r`, continuous at zero.
#[inline]
pub fn tps_radial<T: Scalar>(r: T) -> T {
    if r <= T::zero() {
        T::zero()
    } else {
        r * r * r.ln()
    }
}

/// Design matrix with one radial column per knot followed by `1, s₁, …, s_d`.
pub fn spline_design<T: Scalar>(locations: &Mat<T>, knots: &Mat<T>) -> Result<Mat<T>> {
    let d = locations.ncols();
    if knots.ncols() != d {
        return dim_err(format!("locations have {d} columns, knots {}", knots.ncols()));
    }
    let m = knots.nrows();
    for i in 0..m {
        for j in 0..i {
            if knots.row(i) == knots.row(j) {
                return Err(Error::DuplicateKnots(i));
            }
        }
    }
    Ok(Mat::from_fn(locations.nrows(), m + d + 1, |i, j| {
        let s = locations.row(i);
        if j < m {
            tps_radial(distance(s, knots.row(j)))
        } else if j == m {
            T::one()
        } else {
            s[j - m - 1]
        }
    }))
}

/// Farthest-point subsample of distinct locations, starting from row 0.
pub fn select_knots<T: Scalar>(locations: &Mat<T>, m: usize) -> Mat<T> {
    let n = locations.nrows();
    if n == 0 || m == 0 {
        return Mat::zeros(0, locations.ncols());
    }
    let mut chosen = vec![0usize];
    let mut nearest: Vec<T> = (0..n).map(|i| distance(locations.row(i), locations.row(0))).collect();
    while chosen.len() < m {
        let (idx, &far) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty");
        if !(far > T::zero()) {
            break;
        }
        chosen.push(idx);
        for (i, v) in nearest.iter_mut().enumerate() {
            let d = distance(locations.row(i), locations.row(idx));
            if d < *v {
                *v = d;
            }
        }
    }
    locations.select_rows(&chosen)
}

/// 30 log-spaced values spanning `[1e-8, 1e2] · n`.
pub fn default_lambda_grid<T: Scalar>(n: usize) -> Vec<T> {
    let (a, b) = (-8.0f64, 2.0f64);
    (0..30)
        .map(|i| T::lit(10f64.powf(a + (b - a) * i as f64 / 29.0) * n as f64))
        .collect()
}

/// `n · RSS / (n - tr H)²`.
pub fn gcv_score<T: Scalar>(n: usize, rss: T, trace: T) -> T {
    let nf = T::from_usize_lossy(n);
    let denom = nf - trace;
    nf * rss / (denom * denom)
}

/// Result of a ridge fit with unpenalized columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit<T> {
    pub coefficients: Vec<T>,
    pub lambda: T,
    pub gcv_value: T,
    pub edf: T,
    pub fitted: Vec<T>,
}

impl<T: Scalar> PenalizedFit<T> {
    pub fn residuals(&self, response: &[T]) -> Vec<T> {
        response.iter().zip(&self.fitted).map(|(&y, &f)| y - f).collect()
    }
}

/// Minimizes `‖y - Xb‖² + λ ‖b_pen‖²` over the grid, choosing `λ` by GCV.
pub fn fit_penalized_gcv<T: Scalar>(
    response: &[T],
    design: &Mat<T>,
    penalized: &[bool],
    lambda_grid: &[T],
) -> Result<PenalizedFit<T>> {
    let n = design.nrows();
    if response.len() != n || penalized.len() != design.ncols() {
        return dim_err(format!(
            "design {}x{}, response {}, penalty mask {}",
            n,
            design.ncols(),
            response.len(),
            penalized.len()
        ));
    }
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput("smoothing parameter grid".into()));
    }
    if lambda_grid.iter().any(|l| !(*l >= T::zero())) {
        return Err(Error::DomainError("smoothing parameters must be >= 0".into()));
    }
    let free: Vec<usize> = (0..penalized.len()).filter(|&j| !penalized[j]).collect();
    let pen: Vec<usize> = (0..penalized.len()).filter(|&j| penalized[j]).collect();
    if n <= free.len() {
        return Err(Error::InvalidInput(format!(
            "need more rows ({n}) than unpenalized columns ({})",
            free.len()
        )));
    }
    let u = design.select_cols(&free);
    let r = design.select_cols(&pen);
    let (pu, m) = (free.len(), pen.len());

    // Projection onto the unpenalized span: P_U v = U (UᵀU)⁻¹ Uᵀ v.
    let utu_f = if pu > 0 {
        Some(
            cholesky(&u.gram(), JitterPolicy::none())
                .map_err(|_| Error::RankDeficient("unpenalized spline columns".into()))?,
        )
    } else {
        None
    };
    let project = |v: &[T]| -> Result<Vec<T>> {
        match &utu_f {
            None => Ok(vec![T::zero(); v.len()]),
            Some(f) => u.matvec(&f.solve_vec(&u.tr_matvec(v)?)?),
        }
    };
    let py = project(response)?;
    let my: Vec<T> = response.iter().zip(&py).map(|(&a, &b)| a - b).collect();
    let mut rt = r.clone();
    for j in 0..m {
        let col = r.col(j);
        let pc = project(&col)?;
        let mc: Vec<T> = col.iter().zip(&pc).map(|(&a, &b)| a - b).collect();
        rt.set_col(j, &mc);
    }
    let (vals, tmat, z) = if m > 0 {
        let eig = SymmetricEigen::new(&rt.gram())?;
        let tmat = rt.matmul(&eig.vectors)?;
        let z = tmat.tr_matvec(&my)?;
        (eig.values.iter().map(|v| v.max(T::zero())).collect::<Vec<T>>(), Some((tmat, eig.vectors)), z)
    } else {
        (Vec::new(), None, Vec::new())
    };
    let puf = T::from_usize_lossy(pu);
    let nf = T::from_usize_lossy(n);
    let tiny = T::lit(1e-14) * vals.iter().fold(T::zero(), |a, &b| a.max(b));

    let mut best: Option<(T, T, T, Vec<T>)> = None;
    let mut scaled = vec![T::zero(); m];
    let mut degenerate = true;
    for &lam in lambda_grid {
        let mut trace = puf;
        for k in 0..m {
            let den = vals[k] + lam;
            if den > tiny && den > T::zero() {
                scaled[k] = z[k] / den;
                trace += vals[k] / den;
            } else {
                scaled[k] = T::zero();
            }
        }
        if nf - trace <= T::lit(1e-8) * nf {
            continue;
        }
        degenerate = false;
        let rss = match &tmat {
            Some((t, _)) => (0..n)
                .map(|i| {
                    let e = my[i] - dot(t.row(i), &scaled);
                    e * e
                })
                .sum::<T>(),
            None => my.iter().map(|&e| e * e).sum::<T>(),
        };
        let g = gcv_score(n, rss, trace);
        if g.is_finite() && best.as_ref().map_or(true, |b| g < b.0) {
            best = Some((g, lam, trace, scaled.clone()));
        }
    }
    if degenerate {
        return Err(Error::DegenerateHat);
    }
    let (gcv_value, lambda, edf, scaled) =
        best.ok_or_else(|| Error::DomainError("GCV was not finite for any grid value".into()))?;
    let c = match &tmat {
        Some((_, v)) => v.matvec(&scaled)?,
        None => Vec::new(),
    };
    let rc = if m > 0 { r.matvec(&c)? } else { vec![T::zero(); n] };
    let a = match &utu_f {
        Some(f) => {
            let rest: Vec<T> = response.iter().zip(&rc).map(|(&y, &v)| y - v).collect();
            f.solve_vec(&u.tr_matvec(&rest)?)?
        }
        None => Vec::new(),
    };
    let mut coefficients = vec![T::zero(); design.ncols()];
    for (k, &j) in free.iter().enumerate() {
        coefficients[j] = a[k];
    }
    for (k, &j) in pen.iter().enumerate() {
        coefficients[j] = c[k];
    }
    let fitted = design.matvec(&coefficients)?;
    Ok(PenalizedFit { coefficients, lambda, gcv_value, edf, fitted })
}

/// A fitted thin-plate regression spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit<T> {
    pub knots: Mat<T>,
    pub coefficients: Vec<T>,
    pub lambda: T,
    pub gcv_value: T,
    pub edf: T,
    pub fitted: Vec<T>,
}

/// Radial columns are penalized, affine columns are not.
pub fn spline_penalty_mask(n_knots: usize, dim: usize) -> Vec<bool> {
    (0..n_knots + dim + 1).map(|j| j < n_knots).collect()
}

/// GCV-selected spline fit of `response` on `locations`.
pub fn fit_spline_gcv<T: Scalar>(
    response: &[T],
    locations: &Mat<T>,
    knots: &Mat<T>,
    lambda_grid: &[T],
) -> Result<SplineFit<T>> {
    let d = locations.ncols();
    if locations.nrows() <= d + 1 {
        return Err(Error::InvalidInput(format!("need n > {}, got {}", d + 1, locations.nrows())));
    }
    let design = spline_design(locations, knots)?;
    let mask = spline_penalty_mask(knots.nrows(), d);
    let f = fit_penalized_gcv(response, &design, &mask, lambda_grid)?;
    Ok(SplineFit {
        knots: knots.clone(),
        coefficients: f.coefficients,
        lambda: f.lambda,
        gcv_value: f.gcv_value,
        edf: f.edf,
        fitted: f.fitted,
    })
}

pub fn spline_predict<T: Scalar>(fit: &SplineFit<T>, new_locations: &Mat<T>) -> Result<Vec<T>> {
    let design = spline_design(new_locations, &fit.knots)?;
    if design.ncols() != fit.coefficients.len() {
        return dim_err(format!(
            "basis has {} columns, fit has {} coefficients",
            design.ncols(),
            fit.coefficients.len()
        ));
    }
    design.matvec(&fit.coefficients)
}

/// Spline smoother configuration: knot count and `λ` grid policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineSmoother {
    pub knots: usize,
}

impl Default for SplineSmoother {
    fn default() -> Self {
        Self { knots: DEFAULT_KNOTS }
    }
}

impl SplineSmoother {
    pub fn knots_for<T: Scalar>(&self, locations: &Mat<T>) -> Mat<T> {
        select_knots(locations, self.knots.min(locations.nrows()))
    }

    pub fn fit<T: Scalar>(&self, response: &[T], locations: &Mat<T>) -> Result<SplineFit<T>> {
        let knots = self.knots_for(locations);
        fit_spline_gcv(response, locations, &knots, &default_lambda_grid(locations.nrows()))
    }
}
