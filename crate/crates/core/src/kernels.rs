//! Isotropic correlation functions and correlation-matrix assembly.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{Mat, Scalar};

/// Half-integer smoothness values with closed-form Matérn correlations.
pub const MATERN_HALF_INTEGERS: [f64; 5] = [0.5, 1.5, 2.5, 3.5, 4.5];

/// Scale factor applied to `h / γ` in the Gneiting polynomial.
pub const GNEITING_SCALE: f64 = 0.301_187_465_825;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Matern,
    SqExp,
    Gneiting,
}

impl KernelFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "matern" => Some(Self::Matern),
            "sqexp" | "squared_exponential" | "gaussian" => Some(Self::SqExp),
            "gneiting" => Some(Self::Gneiting),
            _ => None,
        }
    }
}

/// Correlation family with range `gamma`, smoothness `tau` (Matérn only),
/// signal variance `omega2` and nugget `sigma2`.
///
/// The Matérn form is
/// `ρ(h) = 2^{1-τ}/Γ(τ) (√(2τ) h/γ)^τ K_τ(√(2τ) h/γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub gamma: T,
    pub tau: T,
    pub omega2: T,
    pub sigma2: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, gamma: T, tau: T) -> Self {
        Self { family, gamma, tau, omega2: T::one(), sigma2: T::zero() }
    }

    pub fn matern(tau: T, gamma: T) -> Self {
        Self::new(KernelFamily::Matern, gamma, tau)
    }

    /// Matérn with the range expressed without the `√(2τ)` factor, i.e.
    /// `u = h/φ` inside the Bessel form. Equivalent to `gamma = φ√(2τ)`.
    pub fn matern_unscaled_range(tau: T, phi: T) -> Self {
        Self::matern(tau, phi * (T::lit(2.0) * tau).sqrt())
    }

    pub fn exponential(gamma: T) -> Self {
        Self::matern(T::lit(0.5), gamma)
    }

    pub fn sqexp(gamma: T) -> Self {
        Self::new(KernelFamily::SqExp, gamma, T::zero())
    }

    pub fn gneiting(gamma: T) -> Self {
        Self::new(KernelFamily::Gneiting, gamma, T::zero())
    }

    pub fn with_variances(mut self, omega2: T, sigma2: T) -> Self {
        self.omega2 = omega2;
        self.sigma2 = sigma2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::DomainError(format!("range must be positive, got {}", self.gamma)));
        }
        for (name, v) in [("omega2", self.omega2), ("sigma2", self.sigma2)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::DomainError(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.family == KernelFamily::Matern {
            matern_order(self.tau)?;
        }
        Ok(())
    }

    /// Correlation at distance `h`.
    pub fn correlation(&self, h: T) -> Result<T> {
        if !(h >= T::zero()) {
            return Err(Error::DomainError(format!("distance must be >= 0, got {h}")));
        }
        self.validate()?;
        Ok(self.evaluator()?.eval(h))
    }

    /// Pre-validated evaluator for repeated use.
    pub fn evaluator(&self) -> Result<Correlator<T>> {
        self.validate()?;
        let inv_gamma = T::one() / self.gamma;
        Ok(match self.family {
            KernelFamily::Matern => {
                let p = matern_order(self.tau)?;
                let scale = (T::lit(2.0) * self.tau).sqrt() * inv_gamma;
                Correlator::Matern { scale, coef: matern_coefficients(p) }
            }
            KernelFamily::SqExp => Correlator::SqExp { inv_gamma },
            KernelFamily::Gneiting => Correlator::Gneiting { scale: T::lit(GNEITING_SCALE) * inv_gamma },
        })
    }
}

fn matern_order<T: Scalar>(tau: T) -> Result<usize> {
    let t = tau.as_f64();
    MATERN_HALF_INTEGERS
        .iter()
        .position(|&v| (v - t).abs() < 1e-12)
        .ok_or_else(|| Error::DomainError(format!("unsupported Matern smoothness {t}")))
}

/// Coefficients of `u^k` in `p!/(2p)! Σ_i (p+i)!/(i!(p-i)!) (2u)^{p-i}`.
fn matern_coefficients<T: Scalar>(p: usize) -> [T; 5] {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let lead = fact(p) / fact(2 * p);
    let mut c = [T::zero(); 5];
    for i in 0..=p {
        let k = p - i;
        let v = lead * fact(p + i) / (fact(i) * fact(k)) * 2f64.powi(k as i32);
        c[k] = T::lit(v);
    }
    c
}

/// A validated correlation function.
#[derive(Debug, Clone, Copy)]
pub enum Correlator<T> {
    Matern { scale: T, coef: [T; 5] },
    SqExp { inv_gamma: T },
    Gneiting { scale: T },
}

impl<T: Scalar> Correlator<T> {
    #[inline]
    pub fn eval(&self, h: T) -> T {
        if h == T::zero() {
            return T::one();
        }
        match *self {
            Correlator::Matern { scale, coef } => {
                let u = scale * h;
                let mut poly = coef[4];
                for k in (0..4).rev() {
                    poly = poly * u + coef[k];
                }
                poly * (-u).exp()
            }
            Correlator::SqExp { inv_gamma } => {
                let r = h * inv_gamma;
                (-(r * r)).exp()
            }
            Correlator::Gneiting { scale } => {
                let t = scale * h;
                if t >= T::one() {
                    return T::zero();
                }
                let om = T::one() - t;
                let om2 = om * om;
                let om4 = om2 * om2;
                let poly = T::one() + t * (T::lit(8.0) + t * (T::lit(25.0) + t * T::lit(32.0)));
                poly * om4 * om4
            }
        }
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Pairwise Euclidean distances between the rows of `s1` and `s2`.
pub fn distance_matrix<T: Scalar>(s1: &Mat<T>, s2: &Mat<T>) -> Result<Mat<T>> {
    if s1.ncols() != s2.ncols() {
        return dim_err(format!("location dimensions {} vs {}", s1.ncols(), s2.ncols()));
    }
    Ok(Mat::from_fn(s1.nrows(), s2.nrows(), |i, j| distance(s1.row(i), s2.row(j))))
}

/// Symmetric pairwise distances of one location set.
pub fn self_distances<T: Scalar>(s: &Mat<T>) -> Mat<T> {
    let n = s.nrows();
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = distance(s.row(i), s.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Applies the raw correlation function entrywise to a distance matrix.
pub fn correlation_from_distances<T: Scalar>(spec: &KernelSpec<T>, dist: &Mat<T>) -> Result<Mat<T>> {
    let c = spec.evaluator()?;
    Ok(dist.map(|h| c.eval(h)))
}

/// `ω² C + σ² I` from a symmetric distance matrix.
pub fn covariance_from_distances<T: Scalar>(spec: &KernelSpec<T>, dist: &Mat<T>) -> Result<Mat<T>> {
    let c = spec.evaluator()?;
    let (w, s) = (spec.omega2, spec.sigma2);
    let mut m = dist.map(|h| w * c.eval(h));
    m.add_diag(s);
    Ok(m)
}

/// Correlation matrix between two location sets.
///
/// With `add_nugget` the locations must be the same set, and the result is
/// `ω² C + σ² I`. Otherwise raw correlations are returned.
pub fn correlation_matrix<T: Scalar>(
    spec: &KernelSpec<T>,
    s1: &Mat<T>,
    s2: &Mat<T>,
    add_nugget: bool,
) -> Result<Mat<T>> {
    if s1.ncols() != s2.ncols() {
        return dim_err(format!("location dimensions {} vs {}", s1.ncols(), s2.ncols()));
    }
    if add_nugget && s1 != s2 {
        return Err(Error::NuggetOnCrossMatrix);
    }
    let c = spec.evaluator()?;
    if add_nugget {
        return covariance_from_distances(spec, &self_distances(s1));
    }
    Ok(Mat::from_fn(s1.nrows(), s2.nrows(), |i, j| c.eval(distance(s1.row(i), s2.row(j)))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cholesky, JitterPolicy, RngStream};
    use statrs::function::gamma::gamma;

    /// `K_ν(x) = ∫₀^∞ exp(-x cosh t) cosh(νt) dt`, by the trapezoid rule.
    fn bessel_k(nu: f64, x: f64) -> f64 {
        let upper = (40.0 / x + 2.0).ln().max(1.0) + 3.0;
        let m = 40_000;
        let dt = upper / m as f64;
        let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
        let mut s = 0.5 * (f(0.0) + f(upper));
        for i in 1..m {
            s += f(i as f64 * dt);
        }
        s * dt
    }

    fn matern_oracle(tau: f64, gamma_: f64, h: f64) -> f64 {
        let u = (2.0 * tau).sqrt() * h / gamma_;
        2f64.powf(1.0 - tau) / gamma(tau) * u.powf(tau) * bessel_k(tau, u)
    }

    #[test]
    fn unit_at_zero() {
        for spec in [
            KernelSpec::matern(2.5, 0.3),
            KernelSpec::sqexp(0.3),
            KernelSpec::gneiting(0.3),
        ] {
            assert_eq!(spec.correlation(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_form_values() {
        let e1 = (-1f64).exp();
        assert!((KernelSpec::matern(0.5, 0.7).correlation(0.7).unwrap() - e1).abs() < 1e-15);
        let s3 = 3f64.sqrt();
        let v = KernelSpec::matern(1.5, 0.7).correlation(0.7).unwrap();
        assert!((v - (1.0 + s3) * (-s3).exp()).abs() < 1e-15);
        assert!((v - 0.483358).abs() < 1e-6);
        assert!((KernelSpec::sqexp(0.7).correlation(0.7).unwrap() - e1).abs() < 1e-15);
    }

    #[test]
    fn half_integers_match_bessel_integral() {
        for &tau in &MATERN_HALF_INTEGERS {
            let spec = KernelSpec::matern(tau, 0.25);
            for &h in &[0.01, 0.05, 0.1, 0.25, 0.4, 0.8] {
                let got = spec.correlation(h).unwrap();
                let want = matern_oracle(tau, 0.25, h);
                assert!((got - want).abs() < 1e-7, "tau {tau} h {h}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(KernelSpec::matern(1.0, 0.2).correlation(0.1), Err(Error::DomainError(_))));
        assert!(matches!(KernelSpec::sqexp(0.2).correlation(-0.1), Err(Error::DomainError(_))));
        assert!(KernelSpec::sqexp(0.0).validate().is_err());
    }

    #[test]
    fn gneiting_tracks_sqexp() {
        let g = KernelSpec::gneiting(0.2);
        let s = KernelSpec::sqexp(0.2);
        let mut gap = 0.0f64;
        for i in 0..=1000 {
            let h = 0.2 * i as f64 / 1000.0;
            gap = gap.max((g.correlation(h).unwrap() - s.correlation(h).unwrap()).abs());
        }
        assert!(gap <= 0.05, "{gap}");
        let beyond = 0.2 / GNEITING_SCALE;
        assert_eq!(g.correlation(beyond * 1.0001).unwrap(), 0.0);
    }

    #[test]
    fn monotone_decay() {
        for spec in [
            KernelSpec::matern(0.5, 0.2),
            KernelSpec::matern(4.5, 0.2),
            KernelSpec::sqexp(0.2),
            KernelSpec::gneiting(0.2),
        ] {
            let mut prev = 1.0;
            for i in 0..=300 {
                let v = spec.correlation(0.6 * i as f64 / 300.0).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn matrices() {
        let s = Mat::<f64>::from_rows(&[[0.0, 0.0], [0.3, 0.4], [1.0, 0.0]]).unwrap();
        let spec = KernelSpec::gneiting(0.4);
        let c = correlation_matrix(&spec, &s, &s, false).unwrap();
        for i in 0..3 {
            assert_eq!(c[(i, i)], 1.0);
            for j in 0..3 {
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
        let a = Mat::<f64>::from_rows(&[[0.0, 0.0]]).unwrap();
        let b = Mat::<f64>::from_rows(&[[0.6, 0.8]]).unwrap();
        let m = correlation_matrix(&KernelSpec::matern(0.5, 1.0), &a, &b, false).unwrap();
        assert!((m[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(correlation_matrix(&spec, &a, &b, true), Err(Error::NuggetOnCrossMatrix)));

        let two = Mat::<f64>::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let k = KernelSpec::sqexp(0.1).with_variances(1.0, 0.25);
        let m = correlation_matrix(&k, &two, &two, true).unwrap();
        assert_eq!(m.as_slice(), &[1.25, 1.0, 1.0, 1.25]);
        let bad = Mat::<f64>::zeros(1, 3);
        assert!(matches!(correlation_matrix(&k, &two, &bad, false), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn nugget_matrices_factor_without_jitter() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..100 {
            let s = Mat::from_fn(20, 2, |_, _| rng.uniform());
            for spec in [KernelSpec::gneiting(0.3), KernelSpec::matern(1.5, 0.3)] {
                let m = correlation_matrix(&spec.with_variances(1.0, 0.05), &s, &s, true).unwrap();
                let f = cholesky(&m, JitterPolicy::default()).unwrap();
                assert_eq!(f.jitter_applied(), 0.0);
            }
        }
    }

    #[test]
    fn unscaled_range_constructor() {
        let k = KernelSpec::matern_unscaled_range(1.5f64, 0.072);
        let h = 0.1f64;
        let u = h / 0.072;
        assert!((k.correlation(h).unwrap() - (1.0 + u) * (-u).exp()).abs() < 1e-14);
    }
}
