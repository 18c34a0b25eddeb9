use serde::{Deserialize, Serialize};

use super::matrix::Mat;
use super::scalar::{dot, Scalar};
use crate::error::{dim_err, Error, Result};

/// Diagonal jitter schedule used when a Cholesky pivot is not positive.
///
/// Retry `r` (1-based) adds `base_scale * multiplier^(r-1) * mean(diag)` to
/// the diagonal of the original matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub max_retries: u32,
    pub base_scale: f64,
    pub multiplier: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_scale: 1e-8, multiplier: 10.0 }
    }
}

impl JitterPolicy {
    /// Fail on the first non-positive pivot.
    pub fn none() -> Self {
        Self { max_retries: 0, ..Self::default() }
    }
}

/// Lower Cholesky factor `L` with `L Lᵀ = A + jitter_applied * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor<T> {
    lower: Mat<T>,
    log_det: T,
    jitter_applied: T,
}

impl<T: Scalar> SpdFactor<T> {
    pub fn lower(&self) -> &Mat<T> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log det(L Lᵀ) = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    pub fn jitter_applied(&self) -> T {
        self.jitter_applied
    }

    /// Factor of `c * A` for `c > 0`, obtained by scaling `L` by `√c`.
    pub fn scaled(&self, c: T) -> Self {
        let n = T::from_usize_lossy(self.dim());
        Self {
            lower: self.lower.scale(c.sqrt()),
            log_det: self.log_det + n * c.ln(),
            jitter_applied: self.jitter_applied * c,
        }
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let l = &self.lower;
        for i in 0..b.len() {
            let row = l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let l = &self.lower;
        let n = b.len();
        for i in (0..n).rev() {
            let xi = b[i] / l[(i, i)];
            b[i] = xi;
            // Column i of Lᵀ is row i of L.
            let row = l.row(i);
            for k in 0..i {
                b[k] -= row[k] * xi;
            }
        }
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim() {
            return dim_err(format!("factor dim {} vs rhs {}", self.dim(), b.len()));
        }
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        Ok(x)
    }

    /// Whitening `L⁻¹ b`.
    pub fn whiten_vec(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim() {
            return dim_err(format!("factor dim {} vs rhs {}", self.dim(), b.len()));
        }
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        Ok(x)
    }

    /// Column-wise whitening `L⁻¹ B`.
    pub fn whiten(&self, b: &Mat<T>) -> Result<Mat<T>> {
        if b.nrows() != self.dim() {
            return dim_err(format!("factor dim {} vs rhs rows {}", self.dim(), b.nrows()));
        }
        let mut out = b.clone();
        let k = b.ncols();
        let l = &self.lower;
        // Row-oriented forward substitution over all right-hand sides at once.
        for i in 0..b.nrows() {
            let lrow = l.row(i);
            let (done, rest) = out.as_mut_slice().split_at_mut(i * k);
            let cur = &mut rest[..k];
            for (m, &lim) in lrow[..i].iter().enumerate() {
                if lim == T::zero() {
                    continue;
                }
                let prev = &done[m * k..(m + 1) * k];
                for (c, &p) in cur.iter_mut().zip(prev) {
                    *c -= lim * p;
                }
            }
            let d = lrow[i];
            for c in cur.iter_mut() {
                *c /= d;
            }
        }
        Ok(out)
    }

    /// Solves `(L Lᵀ) X = B` for a matrix right-hand side.
    pub fn solve(&self, b: &Mat<T>) -> Result<Mat<T>> {
        let mut out = self.whiten(b)?;
        let k = b.ncols();
        let n = self.dim();
        let mut col = vec![T::zero(); n];
        for j in 0..k {
            for i in 0..n {
                col[i] = out[(i, j)];
            }
            self.solve_upper_in_place(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    /// Explicit inverse `(L Lᵀ)⁻¹`.
    pub fn inverse(&self) -> Mat<T> {
        let n = self.dim();
        let inv = self.solve(&Mat::identity(n)).expect("square identity");
        inv.symmetrized()
    }
}

fn check_symmetric<T: Scalar>(a: &Mat<T>) -> Result<()> {
    let n = a.nrows();
    let scale = a.max_abs().max(T::min_positive_value());
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..i {
            let d = (a[(i, j)] - a[(j, i)]).abs() / scale;
            if d > worst {
                worst = d;
            }
        }
    }
    if worst > T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::NotSymmetric(worst.as_f64()));
    }
    Ok(())
}

/// Four dot products against a shared right-hand side, loading `b` once.
#[inline]
fn dot4<T: Scalar>(a: [&[T]; 4], b: &[T]) -> [T; 4] {
    let mut acc = [[T::zero(); 4]; 4];
    let cb = b.chunks_exact(4);
    let tail_b = cb.remainder();
    let c0 = a[0].chunks_exact(4);
    let c1 = a[1].chunks_exact(4);
    let c2 = a[2].chunks_exact(4);
    let c3 = a[3].chunks_exact(4);
    for ((((y, x0), x1), x2), x3) in cb.zip(c0).zip(c1).zip(c2).zip(c3) {
        for t in 0..4 {
            acc[0][t] += x0[t] * y[t];
            acc[1][t] += x1[t] * y[t];
            acc[2][t] += x2[t] * y[t];
            acc[3][t] += x3[t] * y[t];
        }
    }
    let off = b.len() - tail_b.len();
    let mut out = [T::zero(); 4];
    for r in 0..4 {
        let mut s = (acc[r][0] + acc[r][2]) + (acc[r][1] + acc[r][3]);
        for (k, &y) in tail_b.iter().enumerate() {
            s += a[r][off + k] * y;
        }
        out[r] = s;
    }
    out
}

/// Attempts an unjittered factorization of `a + shift I` reading the lower
/// triangle. Returns the failing pivot on error.
///
/// Rows are produced four at a time so every finished row is streamed once
/// per block instead of once per row.
fn try_factor<T: Scalar>(a: &Mat<T>, shift: T, out: &mut Mat<T>) -> std::result::Result<T, usize> {
    let n = a.nrows();
    let mut log_det = T::zero();
    let two = T::lit(2.0);
    let l = out.as_mut_slice();
    l.iter_mut().for_each(|v| *v = T::zero());
    let mut i0 = 0;
    while i0 < n {
        let bs = (n - i0).min(4);
        let (prev, cur) = l.split_at_mut(i0 * n);
        if bs == 4 {
            let (r0, rest) = cur.split_at_mut(n);
            let (r1, rest) = rest.split_at_mut(n);
            let (r2, rest) = rest.split_at_mut(n);
            let r3 = &mut rest[..n];
            for j in 0..i0 {
                let lj = &prev[j * n..j * n + j];
                let ljj = prev[j * n + j];
                let s = dot4([&r0[..j], &r1[..j], &r2[..j], &r3[..j]], lj);
                r0[j] = (a[(i0, j)] - s[0]) / ljj;
                r1[j] = (a[(i0 + 1, j)] - s[1]) / ljj;
                r2[j] = (a[(i0 + 2, j)] - s[2]) / ljj;
                r3[j] = (a[(i0 + 3, j)] - s[3]) / ljj;
            }
        } else {
            for r in 0..bs {
                let row = &mut cur[r * n..(r + 1) * n];
                for j in 0..i0 {
                    let s = dot(&row[..j], &prev[j * n..j * n + j]);
                    row[j] = (a[(i0 + r, j)] - s) / prev[j * n + j];
                }
            }
        }
        // Triangle inside the block.
        for i in i0..i0 + bs {
            let (prev, cur) = l.split_at_mut(i * n);
            let cur = &mut cur[..n];
            for j in i0..i {
                let s = dot(&cur[..j], &prev[j * n..j * n + j]);
                cur[j] = (a[(i, j)] - s) / prev[j * n + j];
            }
            let d = a[(i, i)] + shift - dot(&cur[..i], &cur[..i]);
            if !(d > T::zero()) || !d.is_finite() {
                return Err(i);
            }
            let r = d.sqrt();
            cur[i] = r;
            log_det += two * r.ln();
        }
        i0 += bs;
    }
    Ok(log_det)
}

/// Cholesky factorization with the diagonal-jitter retry schedule.
pub fn cholesky<T: Scalar>(a: &Mat<T>, policy: JitterPolicy) -> Result<SpdFactor<T>> {
    if !a.is_square() {
        return dim_err(format!("cholesky of {}x{} matrix", a.nrows(), a.ncols()));
    }
    check_symmetric(a)?;
    let n = a.nrows();
    let mut out = Mat::zeros(n, n);
    let mean_diag = if n == 0 {
        T::zero()
    } else {
        a.diag().into_iter().map(|x| x.abs()).sum::<T>() / T::from_usize_lossy(n)
    };
    let mut shift = T::zero();
    let mut last_pivot = 0;
    for attempt in 0..=policy.max_retries {
        if attempt > 0 {
            let mult = policy.multiplier.powi(attempt as i32 - 1);
            shift = T::lit(policy.base_scale * mult) * mean_diag;
        }
        match try_factor(a, shift, &mut out) {
            Ok(log_det) => {
                return Ok(SpdFactor { lower: out, log_det, jitter_applied: shift });
            }
            Err(p) => last_pivot = p,
        }
    }
    Err(Error::NotPositiveDefinite { pivot: last_pivot, jitter: shift.as_f64() })
}

/// Solves `(L Lᵀ) X = rhs`.
pub fn chol_solve<T: Scalar>(factor: &SpdFactor<T>, rhs: &Mat<T>) -> Result<Mat<T>> {
    factor.solve(rhs)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal log density `-½[n log 2π + log det Σ + rᵀ Σ⁻¹ r]`.
pub fn gaussian_loglik<T: Scalar>(cov: &Mat<T>, residual: &[T]) -> Result<T> {
    if cov.nrows() != residual.len() {
        return dim_err(format!("cov {}x{} vs residual {}", cov.nrows(), cov.ncols(), residual.len()));
    }
    let f = cholesky(cov, JitterPolicy::default())?;
    let w = f.whiten_vec(residual)?;
    let quad = dot(&w, &w);
    let n = T::from_usize_lossy(residual.len());
    Ok(-T::lit(0.5) * (n * T::lit(LN_2PI) + f.log_det() + quad))
}

/// LU factorization with partial pivoting, for small general systems.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return dim_err("LU of non-square matrix");
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::RankDeficient("zero pivot in LU".into()));
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(k, piv);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.nrows();
        if b.len() != n {
            return dim_err("LU rhs length");
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = self.lu[(i, k)] * x[k];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.lu[(i, k)] * x[k];
                x[i] -= v;
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Mat<T> {
        let n = self.lu.nrows();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve_vec(&e).expect("dimension checked");
            inv.set_col(j, &col);
        }
        inv
    }
}

/// Symmetric eigendecomposition `A = V diag(values) Vᵀ`, eigenvalues ascending,
/// eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Householder tridiagonalization followed by implicit QL iterations.
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return dim_err("eigendecomposition of non-square matrix");
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: Mat::zeros(0, 0) });
        }
        let mut v: Vec<Vec<T>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tred2(&mut v, &mut d, &mut e);
        // Work on Vᵀ so QL rotations touch contiguous rows.
        let mut vt: Vec<Vec<T>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
        tql2(&mut vt, &mut d, &mut e)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&k| d[k]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| vt[order[j]][i]);
        Ok(Self { values, vectors })
    }
}

fn tred2<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
                v[j][i] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[k][j] -= upd;
                }
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[k][j] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = T::zero();
    }
    v[n - 1][n - 1] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Scalar>(vt: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::DomainError("eigenvalue iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut(i + 1);
                    let vi = &mut lo[i];
                    let vi1 = &mut hi[0];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hb = *b;
                        *b = s * *a + c * hb;
                        *a = c * *a - s * hb;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Extreme singular values `(σ_min, σ_max)` of a small matrix via the
/// eigenvalues of `MᵀM`.
pub fn singular_value_range<T: Scalar>(m: &Mat<T>) -> Result<(T, T)> {
    let g = m.gram();
    let eig = SymmetricEigen::new(&g)?;
    let lo = eig.values.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    let hi = eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    Ok((lo, hi))
}

/// Solves the square system `m x = b` after checking that the smallest
/// singular value of `m` exceeds `1e-10 * ‖m‖₂`.
pub fn solve_checked<T: Scalar>(m: &Mat<T>, b: &[T], what: &str) -> Result<(Vec<T>, Mat<T>)> {
    let (lo, hi) = singular_value_range(m)?;
    if !(hi > T::zero()) || lo < T::lit(1e-10) * hi {
        return Err(Error::RankDeficient(format!(
            "{what}: smallest singular value {:e} vs norm {:e}",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    let lu = Lu::new(m)?;
    let x = lu.solve_vec(b)?;
    Ok((x, lu.inverse()))
}
