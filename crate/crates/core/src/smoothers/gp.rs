//! Universal Kriging with restricted (or full) likelihood hyperparameter fits.
//!
//! The covariance is parameterized as `s² ((1-ν) C_γ + ν I)`. The scale `s²`
//! and the GLS slope are profiled out in closed form, so the simplex only
//! searches over `(log γ, logit ν)`. The reported variances are
//! `ω² = s²(1-ν)` and `σ² = s²ν`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::kernels::{self_distances, Correlator, KernelFamily, KernelSpec, MATERN_HALF_INTEGERS};
use crate::numerics::{
    cholesky, dot, singular_value_range, JitterPolicy, Mat, NelderMead, Scalar, SpdFactor,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LOGIT_BOUND: f64 = 25.0;

/// How the Matérn smoothness is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    Fixed(f64),
    /// Fit every supported half-integer and keep the best likelihood.
    Profile,
}

impl TauMode {
    /// Parses `"profile"` or a number such as `"1.5"`.
    pub fn parse(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("profile") {
            return Some(Self::Profile);
        }
        s.parse::<f64>().ok().map(Self::Fixed)
    }

    fn candidates(&self, family: KernelFamily) -> Vec<f64> {
        match (family, self) {
            (KernelFamily::Matern, TauMode::Profile) => MATERN_HALF_INTEGERS.to_vec(),
            (KernelFamily::Matern, TauMode::Fixed(t)) => vec![*t],
            _ => vec![0.0],
        }
    }
}

impl std::fmt::Display for TauMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauMode::Fixed(t) => write!(f, "{t}"),
            TauMode::Profile => f.write_str("profile"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ml,
    Reml,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    pub family: KernelFamily,
    pub tau_mode: TauMode,
    pub criterion: Criterion,
    /// Objective evaluations per smoothness value.
    pub budget: usize,
    pub tol: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern,
            tau_mode: TauMode::Fixed(1.5),
            criterion: Criterion::Reml,
            budget: 120,
            tol: 1e-4,
        }
    }
}

/// A fitted universal-Kriging model.
#[derive(Debug, Clone)]
pub struct GpFit<T> {
    pub spec: KernelSpec<T>,
    pub slope: Vec<T>,
    pub training_locations: Mat<T>,
    pub training_mean_design: Mat<T>,
    /// Factor of `ω² C + σ² I`.
    pub factor: SpdFactor<T>,
    /// `(ω² C + σ² I)⁻¹ (y - X slope)`.
    pub dual_weights: Vec<T>,
    pub reml_value: T,
    pub used_reml: bool,
    pub converged: bool,
}

struct Profiled<T> {
    loglik: T,
    factor: SpdFactor<T>,
    slope: Vec<T>,
    scale: T,
}

/// Shared state for repeated likelihood evaluations on one data set.
struct Problem<'a, T> {
    y: &'a [T],
    x: &'a Mat<T>,
    dist: Mat<T>,
    /// `[X y]`, whitened together.
    xy: Mat<T>,
    criterion: Criterion,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(y: &'a [T], x: &'a Mat<T>, locations: &Mat<T>, criterion: Criterion) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || locations.nrows() != n {
            return dim_err(format!(
                "response {n}, mean design {} rows, locations {} rows",
                x.nrows(),
                locations.nrows()
            ));
        }
        let p = x.ncols();
        if n < p + 2 {
            return Err(Error::InvalidInput(format!("need n >= p + 2, got n = {n}, p = {p}")));
        }
        if p > 0 {
            let (lo, hi) = singular_value_range(x)?;
            if !(lo > T::lit(1e-10) * hi) {
                return Err(Error::SingularMeanDesign);
            }
        }
        let xy = x.hcat(&Mat::column(y))?;
        Ok(Self { y, x, dist: self_distances(locations), xy, criterion })
    }

    fn diameter(&self) -> T {
        self.dist.max_abs()
    }

    fn correlation(&self, corr: &Correlator<T>, nu: T) -> Mat<T> {
        let n = self.dist.nrows();
        let w = T::one() - nu;
        let mut r = Mat::identity(n);
        for i in 0..n {
            for j in 0..i {
                let v = w * corr.eval(self.dist[(i, j)]);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        r
    }

    /// Profiled log likelihood at unit scale correlation `R = (1-ν)C + νI`.
    fn profile(&self, spec: &KernelSpec<T>, nu: T) -> Result<Profiled<T>> {
        let corr = spec.evaluator()?;
        let r = self.correlation(&corr, nu);
        let factor = cholesky(&r, JitterPolicy::default())?;
        self.profile_with_factor(factor)
    }

    fn profile_with_factor(&self, factor: SpdFactor<T>) -> Result<Profiled<T>> {
        let n = self.y.len();
        let p = self.x.ncols();
        let w = factor.whiten(&self.xy)?;
        let (slope, xtx_logdet, resid_ss) = gls_from_whitened(&w, p)?;
        let nf = T::from_usize_lossy(n);
        let ln2pi = T::lit(LN_2PI);
        let (loglik, scale) = match self.criterion {
            Criterion::Reml => {
                let dof = T::from_usize_lossy(n - p);
                let s2 = resid_ss / dof;
                let v = dof * (ln2pi + T::one() + s2.ln()) + factor.log_det() + xtx_logdet;
                (-T::lit(0.5) * v, s2)
            }
            Criterion::Ml => {
                let s2 = resid_ss / nf;
                let v = nf * (ln2pi + T::one() + s2.ln()) + factor.log_det();
                (-T::lit(0.5) * v, s2)
            }
        };
        Ok(Profiled { loglik, factor, slope, scale })
    }
}

/// GLS slope, `log det(X̃ᵀX̃)` and residual sum of squares from the whitened
/// `[X̃ ỹ]` matrix.
fn gls_from_whitened<T: Scalar>(w: &Mat<T>, p: usize) -> Result<(Vec<T>, T, T)> {
    let n = w.nrows();
    let mut xtx = Mat::zeros(p, p);
    let mut xty = vec![T::zero(); p];
    let mut yty = T::zero();
    for i in 0..n {
        let row = w.row(i);
        let yi = row[p];
        yty += yi * yi;
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in 0..=a {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    if p == 0 {
        return Ok((Vec::new(), T::zero(), yty));
    }
    let f = cholesky(&xtx, JitterPolicy::none()).map_err(|_| Error::SingularMeanDesign)?;
    let slope = f.solve_vec(&xty)?;
    let rss = (0..n)
        .map(|i| {
            let row = w.row(i);
            let r = row[p] - dot(&row[..p], &slope);
            r * r
        })
        .sum::<T>();
    Ok((slope, f.log_det(), rss))
}

fn inv_logit<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Profiled log likelihood of the data at a given range, smoothness and
/// nugget fraction `ν = σ²/(ω²+σ²)`.
pub fn profile_loglik<T: Scalar>(
    response: &[T],
    mean_design: &Mat<T>,
    locations: &Mat<T>,
    spec: &KernelSpec<T>,
    nugget_fraction: T,
    criterion: Criterion,
) -> Result<T> {
    let prob = Problem::new(response, mean_design, locations, criterion)?;
    Ok(prob.profile(spec, nugget_fraction)?.loglik)
}

/// Fits the universal-Kriging working model by maximizing the profiled
/// (restricted) likelihood.
pub fn fit_gp_reml<T: Scalar>(
    response: &[T],
    mean_design: &Mat<T>,
    locations: &Mat<T>,
    opts: &GpOptions,
) -> Result<GpFit<T>> {
    let prob = Problem::new(response, mean_design, locations, opts.criterion)?;
    let diam = prob.diameter();
    if !(diam > T::zero()) {
        return Err(Error::DomainError("all locations coincide".into()));
    }
    let lo = (T::lit(1e-3) * diam).ln();
    let hi = (T::lit(10.0) * diam).ln();
    let bound = T::lit(LOGIT_BOUND);

    let run = |tau: f64, init: &[T], budget: usize| -> Option<(T, KernelSpec<T>, Vec<T>, bool)> {
        let base = KernelSpec::new(opts.family, T::one(), T::lit(tau));
        let objective = |v: &[T]| -> T {
            if v[0] < lo || v[0] > hi || v[1].abs() > bound {
                return T::infinity();
            }
            let mut spec = base;
            spec.gamma = v[0].exp();
            match prob.profile(&spec, inv_logit(v[1])) {
                Ok(p) => -p.loglik,
                Err(_) => T::infinity(),
            }
        };
        let nm = NelderMead::new(budget.max(4), T::lit(opts.tol))
            .with_step(vec![T::lit(0.5), T::lit(1.0)]);
        let m = nm.minimize(objective, init);
        m.value.is_finite().then(|| (-m.value, base, m.argmin, m.converged))
    };

    let candidates = opts.tau_mode.candidates(opts.family);
    for &tau in &candidates {
        KernelSpec::new(opts.family, T::one(), T::lit(tau)).validate()?;
    }
    let init = vec![(T::lit(0.2) * diam).ln(), T::zero()];
    let best = if candidates.len() == 1 {
        run(candidates[0], &init, opts.budget)
    } else {
        // Coarse pass over every smoothness, warm-starting each from the
        // previous optimum, then a full refinement of the winner.
        let coarse = (opts.budget / 4).max(20);
        let mut best: Option<(T, KernelSpec<T>, Vec<T>, bool)> = None;
        let mut start = init;
        for &tau in &candidates {
            if let Some(r) = run(tau, &start, coarse) {
                start = r.2.clone();
                if best.as_ref().map_or(true, |b| r.0 > b.0) {
                    best = Some(r);
                }
            }
        }
        best.and_then(|(ll, base, x, conv)| {
            let refined = run(base.tau.as_f64(), &x, opts.budget)?;
            Some(if refined.0 >= ll { refined } else { (ll, base, x, conv) })
        })
    };
    let best = best.map(|(ll, mut spec, x, conv)| {
        spec.gamma = x[0].exp();
        (ll, spec, inv_logit(x[1]), conv)
    });
    let (_, spec, nu, converged) = best.ok_or(Error::OptimFailed)?;
    let prof = prob.profile(&spec, nu)?;
    Ok(assemble(&prob, spec, nu, prof, locations, opts.criterion, converged))
}

fn assemble<T: Scalar>(
    prob: &Problem<'_, T>,
    mut spec: KernelSpec<T>,
    nu: T,
    prof: Profiled<T>,
    locations: &Mat<T>,
    criterion: Criterion,
    converged: bool,
) -> GpFit<T> {
    let s2 = prof.scale;
    spec.omega2 = s2 * (T::one() - nu);
    spec.sigma2 = s2 * nu;
    let factor = prof.factor.scaled(s2);
    let resid: Vec<T> = prob
        .y
        .iter()
        .enumerate()
        .map(|(i, &yi)| yi - dot(prob.x.row(i), &prof.slope))
        .collect();
    let dual_weights = factor.solve_vec(&resid).expect("factor matches data");
    GpFit {
        spec,
        slope: prof.slope,
        training_locations: locations.clone(),
        training_mean_design: prob.x.clone(),
        factor,
        dual_weights,
        reml_value: prof.loglik,
        used_reml: criterion == Criterion::Reml,
        converged,
    }
}

impl<T: Scalar> GpFit<T> {
    /// GLS fit at fixed covariance parameters (no optimization).
    pub fn with_spec(
        spec: KernelSpec<T>,
        response: &[T],
        mean_design: &Mat<T>,
        locations: &Mat<T>,
        criterion: Criterion,
    ) -> Result<Self> {
        spec.validate()?;
        let prob = Problem::new(response, mean_design, locations, criterion)?;
        let cov = {
            let corr = spec.evaluator()?;
            let mut m = prob.dist.map(|h| spec.omega2 * corr.eval(h));
            m.add_diag(spec.sigma2);
            m
        };
        let factor = cholesky(&cov, JitterPolicy::default())?;
        let prof = prob.profile_with_factor(factor.clone())?;
        let resid: Vec<T> = response
            .iter()
            .enumerate()
            .map(|(i, &yi)| yi - dot(mean_design.row(i), &prof.slope))
            .collect();
        let dual_weights = factor.solve_vec(&resid)?;
        Ok(Self {
            spec,
            slope: prof.slope,
            training_locations: locations.clone(),
            training_mean_design: mean_design.clone(),
            factor,
            dual_weights,
            reml_value: prof.loglik,
            used_reml: criterion == Criterion::Reml,
            converged: true,
        })
    }

    /// `(Xᵀ Σ⁻¹ X)⁻¹`, the GLS slope covariance.
    pub fn slope_covariance(&self) -> Result<Mat<T>> {
        let w = self.factor.whiten(&self.training_mean_design)?;
        let g = w.gram();
        let f = cholesky(&g, JitterPolicy::none()).map_err(|_| Error::SingularMeanDesign)?;
        Ok(f.inverse())
    }

    /// Conditional-mean prediction `X_new slope + trend`.
    pub fn predict_mean(&self, new_locations: &Mat<T>, new_mean_design: &Mat<T>) -> Result<Vec<T>> {
        let trend = krige_predict(self, new_locations, new_mean_design)?;
        Ok(trend
            .into_iter()
            .enumerate()
            .map(|(i, t)| t + dot(new_mean_design.row(i), &self.slope))
            .collect())
    }
}

/// Spatial-trend prediction `ω² C(S_new, S_train) · dual_weights`.
pub fn krige_predict<T: Scalar>(
    fit: &GpFit<T>,
    new_locations: &Mat<T>,
    new_mean_design: &Mat<T>,
) -> Result<Vec<T>> {
    let train = &fit.training_locations;
    if new_locations.ncols() != train.ncols() {
        return dim_err(format!(
            "new locations have {} columns, training {}",
            new_locations.ncols(),
            train.ncols()
        ));
    }
    if new_mean_design.nrows() != new_locations.nrows()
        || new_mean_design.ncols() != fit.training_mean_design.ncols()
    {
        return dim_err(format!(
            "new mean design {}x{} for {} locations and {} slopes",
            new_mean_design.nrows(),
            new_mean_design.ncols(),
            new_locations.nrows(),
            fit.slope.len()
        ));
    }
    let corr = fit.spec.evaluator()?;
    let w = fit.spec.omega2;
    let mut kweights = vec![T::zero(); train.nrows()];
    Ok((0..new_locations.nrows())
        .map(|q| {
            let s = new_locations.row(q);
            for (k, row) in kweights.iter_mut().enumerate() {
                *row = corr.eval(crate::kernels::distance(s, train.row(k)));
            }
            w * dot(&kweights, &fit.dual_weights)
        })
        .collect())
}
