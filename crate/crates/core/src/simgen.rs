//! Simulated spatial-confounding scenarios.
//!
//! Treatment `A` and latent confounder `Z` are jointly Gaussian over the
//! sampled locations; `Z` enters the response but is never exposed to the
//! estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::kernels::{correlation_matrix, KernelSpec};
use crate::numerics::{cholesky, gamma_shape1_quantile, normal_cdf, JitterPolicy, Mat, RngStream};

/// Jitter schedule for simulation covariances: up to `1e-5 · mean(diag)`.
pub const SIM_JITTER: JitterPolicy = JitterPolicy { max_retries: 6, base_scale: 1e-10, multiplier: 10.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Main,
    Cubed,
    GammaErrors,
    EastWest,
    MiddleOut,
    HighVarA,
    VeryRough,
    GridLocations,
    DeterministicSame,
    DeterministicDiff,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 10] = [
        ScenarioName::Main,
        ScenarioName::Cubed,
        ScenarioName::GammaErrors,
        ScenarioName::EastWest,
        ScenarioName::MiddleOut,
        ScenarioName::HighVarA,
        ScenarioName::VeryRough,
        ScenarioName::GridLocations,
        ScenarioName::DeterministicSame,
        ScenarioName::DeterministicDiff,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Main => "main",
            ScenarioName::Cubed => "cubed",
            ScenarioName::GammaErrors => "gamma_errors",
            ScenarioName::EastWest => "east_west",
            ScenarioName::MiddleOut => "middle_out",
            ScenarioName::HighVarA => "high_var_A",
            ScenarioName::VeryRough => "very_rough",
            ScenarioName::GridLocations => "grid_locations",
            ScenarioName::DeterministicSame => "deterministic_same",
            ScenarioName::DeterministicDiff => "deterministic_diff",
        }
    }

    /// Case-insensitive lookup by catalog name.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named spatial-surface presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// Gneiting, range 0.2.
    Smooth,
    /// Matérn τ = 1.5 with range 0.072 in the unscaled (`h/φ`) convention.
    Rough,
    /// Exponential, range 0.114.
    VeryRough,
}

impl Surface {
    pub fn kernel(&self) -> KernelSpec<f64> {
        match self {
            Surface::Smooth => KernelSpec::gneiting(0.2),
            Surface::Rough => KernelSpec::matern_unscaled_range(1.5, 0.072),
            Surface::VeryRough => KernelSpec::exponential(0.114),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Some(Surface::Smooth),
            "rough" => Some(Surface::Rough),
            "very_rough" => Some(Surface::VeryRough),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationMode {
    Uniform,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub n: usize,
    pub rho: f64,
    pub sigma2_a: f64,
    pub sigma2_y: f64,
    pub beta0: f64,
    pub kernel_a: KernelSpec<f64>,
    pub kernel_z: KernelSpec<f64>,
}

impl ScenarioConfig {
    /// Defaults for a catalog entry: n = 1000, ρ = 0.5, σ²_A = 0.01,
    /// σ²_Y = 1, β₀ = 0.5, smooth surfaces.
    pub fn new(name: ScenarioName) -> Self {
        let surface = if name == ScenarioName::VeryRough { Surface::VeryRough } else { Surface::Smooth };
        Self {
            name,
            n: 1000,
            rho: 0.5,
            sigma2_a: if name == ScenarioName::HighVarA { 1.0 } else { 0.01 },
            sigma2_y: 1.0,
            beta0: 0.5,
            kernel_a: surface.kernel(),
            kernel_z: surface.kernel(),
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_surfaces(mut self, a: Surface, z: Surface) -> Self {
        self.kernel_a = a.kernel();
        self.kernel_z = z.kernel();
        self
    }

    pub fn location_mode(&self) -> LocationMode {
        if self.name == ScenarioName::GridLocations {
            LocationMode::Grid
        } else {
            LocationMode::Uniform
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::DomainError(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.sigma2_a >= 0.0) || !(self.sigma2_y >= 0.0) {
            return Err(Error::DomainError("variances must be non-negative".into()));
        }
        if !self.beta0.is_finite() {
            return Err(Error::DomainError("beta0 must be finite".into()));
        }
        self.kernel_a.validate()?;
        self.kernel_z.validate()
    }
}

/// One simulated data set with its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dataset: Dataset<f64>,
    pub beta0: f64,
    /// The unobserved confounder (or `g₀(S)` for the deterministic designs).
    pub latent: Vec<f64>,
}

/// Uniform points on `[0, 1]²` or the `√n × √n` lattice including the
/// edges of the square.
pub fn sample_locations(n: usize, mode: LocationMode, rng: &mut RngStream) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one location".into()));
    }
    match mode {
        LocationMode::Uniform => Ok(Mat::from_fn(n, 2, |_, _| rng.uniform())),
        LocationMode::Grid => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n {
                return Err(Error::NotPerfectSquare(n));
            }
            let step = if m > 1 { 1.0 / (m - 1) as f64 } else { 0.0 };
            Ok(Mat::from_fn(n, 2, |i, j| if j == 0 { (i / m) as f64 * step } else { (i % m) as f64 * step }))
        }
    }
}

/// Joint covariance `[[Σ_A + σ²_A I, ρ L_A L_Zᵀ], [ρ L_Z L_Aᵀ, Σ_Z]]` with
/// lower Cholesky factors as matrix square roots.
pub fn joint_covariance(
    s: &Mat<f64>,
    kernel_a: &KernelSpec<f64>,
    kernel_z: &KernelSpec<f64>,
    rho: f64,
    sigma2_a: f64,
) -> Result<Mat<f64>> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::DomainError(format!("rho must lie in [-1, 1], got {rho}")));
    }
    let unit = |k: &KernelSpec<f64>| k.with_variances(1.0, 0.0);
    let sa = correlation_matrix(&unit(kernel_a), s, s, false)?;
    let sz = correlation_matrix(&unit(kernel_z), s, s, false)?;
    let n = s.nrows();
    let cross = if rho == 0.0 {
        Mat::zeros(n, n)
    } else {
        let la = cholesky(&sa, SIM_JITTER)?;
        let lz = cholesky(&sz, SIM_JITTER)?;
        la.lower().matmul(&lz.lower().transpose())?.scale(rho)
    };
    Ok(Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => sa[(i, j)] + if i == j { sigma2_a } else { 0.0 },
        (true, false) => cross[(i, j - n)],
        (false, true) => cross[(j, i - n)],
        (false, false) => sz[(i - n, j - n)],
    }))
}

/// One joint draw of `(A, Z)` through the Cholesky factor of the block
/// covariance.
pub fn draw_joint_az(
    s: &Mat<f64>,
    kernel_a: &KernelSpec<f64>,
    kernel_z: &KernelSpec<f64>,
    rho: f64,
    sigma2_a: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = s.nrows();
    let cov = joint_covariance(s, kernel_a, kernel_z, rho, sigma2_a)?;
    let l = cholesky(&cov, SIM_JITTER)?;
    let w: Vec<f64> = (0..2 * n).map(|_| rng.normal()).collect();
    let x = l.lower().matvec(&w)?;
    Ok((x[..n].to_vec(), x[n..].to_vec()))
}

/// `cos(10 s₁) sin(10 s₂)`.
pub fn wave_same(s: &[f64]) -> f64 {
    (10.0 * s[0]).cos() * (10.0 * s[1]).sin()
}

/// `cos(10 s₁) sin(10 s₂) + sin(10 s₁) sin(10 s₂)`.
pub fn wave_diff(s: &[f64]) -> f64 {
    wave_same(s) + (10.0 * s[0]).sin() * (10.0 * s[1]).sin()
}

/// Gamma-error transform `q[Φ(ε/√3)]` with `q` the quantile of the
/// shape-1 gamma with rate `1/√3`.
pub fn gamma_error(eps: f64) -> Result<f64> {
    let r3 = 3f64.sqrt();
    let p = normal_cdf(eps / r3).min(1.0 - f64::EPSILON);
    gamma_shape1_quantile(p, r3)
}

/// Middle-out weight `Φ((s₁ - 0.5)/0.1)`.
pub fn middle_out_weight(s1: f64) -> f64 {
    normal_cdf((s1 - 0.5) / 0.1)
}

/// Draws one data set from the scenario.
pub fn gen_scenario(config: &ScenarioConfig, rng: &mut RngStream) -> Result<Scenario> {
    config.validate()?;
    let n = config.n;
    let s = sample_locations(n, config.location_mode(), rng)?;
    let b = config.beta0;
    let sd_y = config.sigma2_y.sqrt();
    let (a, latent, y) = match config.name {
        ScenarioName::DeterministicSame | ScenarioName::DeterministicDiff => {
            let sd_a = config.sigma2_a.sqrt();
            let m: Vec<f64> = (0..n).map(|i| wave_same(s.row(i))).collect();
            let g: Vec<f64> = if config.name == ScenarioName::DeterministicSame {
                m.clone()
            } else {
                (0..n).map(|i| wave_diff(s.row(i))).collect()
            };
            let a: Vec<f64> = m.iter().map(|&mi| mi + sd_a * rng.normal()).collect();
            let y = (0..n).map(|i| b * a[i] + g[i] + sd_y * rng.normal()).collect();
            (a, g, y)
        }
        name => {
            let (a, z) = draw_joint_az(&s, &config.kernel_a, &config.kernel_z, config.rho, config.sigma2_a, rng)?;
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let eps = sd_y * rng.normal();
                let ai = b * a[i];
                y.push(match name {
                    ScenarioName::Cubed => ai + z[i].powi(3) + eps,
                    ScenarioName::GammaErrors => ai + z[i] + gamma_error(eps)?,
                    ScenarioName::EastWest => ai + z[i] + s[(i, 0)] * eps,
                    ScenarioName::MiddleOut => {
                        let w = middle_out_weight(s[(i, 0)]);
                        ai + (w / 3.0).sqrt() * z[i] + (1.0 - w).sqrt() * eps
                    }
                    _ => ai + z[i] + eps,
                });
            }
            (a, z, y)
        }
    };
    let dataset = Dataset::without_covariates(y, Mat::column(&a), s)?;
    Ok(Scenario { dataset, beta0: b, latent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mean;

    #[test]
    fn grid_lattice() {
        let g = sample_locations(4, LocationMode::Grid, &mut RngStream::new(0, 0)).unwrap();
        let mut pts: Vec<(f64, f64)> = (0..4).map(|i| (g[(i, 0)], g[(i, 1)])).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(
            sample_locations(5, LocationMode::Grid, &mut RngStream::new(0, 0)),
            Err(Error::NotPerfectSquare(5))
        ));
        let g9 = sample_locations(9, LocationMode::Grid, &mut RngStream::new(0, 0)).unwrap();
        assert!((0..9).any(|i| g9.row(i) == [0.5, 0.5]));
    }

    #[test]
    fn uniform_inside_and_reproducible() {
        let a = sample_locations(200, LocationMode::Uniform, &mut RngStream::new(3, 1)).unwrap();
        let b = sample_locations(200, LocationMode::Uniform, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(a, b);
        assert!((0..200).all(|i| a.row(i).iter().all(|&v| v > 0.0 && v < 1.0)));
    }

    #[test]
    fn block_structure() {
        let s = sample_locations(30, LocationMode::Uniform, &mut RngStream::new(4, 0)).unwrap();
        let ka = Surface::Rough.kernel();
        let kz = Surface::Smooth.kernel();
        let c0 = joint_covariance(&s, &ka, &kz, 0.0, 0.01).unwrap();
        for i in 0..30 {
            assert!((c0[(i, i)] - 1.01).abs() < 1e-15);
            assert_eq!(c0[(30 + i, 30 + i)], 1.0);
            for j in 0..30 {
                assert_eq!(c0[(i, 30 + j)], 0.0);
            }
        }
        let c = joint_covariance(&s, &ka, &kz, 0.7, 0.01).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
        assert!(cholesky(&c, SIM_JITTER).is_ok());
    }

    #[test]
    fn deterministic_waves() {
        assert_eq!(wave_same(&[0.0, 0.0]), 0.0);
        let q = std::f64::consts::PI / 20.0;
        assert!(wave_same(&[q, q]).abs() < 1e-15);
    }

    #[test]
    fn gamma_errors_nonnegative() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..2000 {
            assert!(gamma_error(3.0 * rng.normal()).unwrap() >= 0.0);
        }
        assert!(gamma_error(40.0).unwrap().is_finite());
    }

    fn kernel_distance_at(k: &KernelSpec<f64>, target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if k.correlation(mid).unwrap() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn practical_ranges_match() {
        let ds = kernel_distance_at(&Surface::Smooth.kernel(), 0.05);
        let dr = kernel_distance_at(&Surface::Rough.kernel(), 0.05);
        assert!((ds - dr).abs() <= 0.2 * ds.max(dr), "smooth {ds}, rough {dr}");
    }

    #[test]
    fn every_scenario_generates() {
        for name in ScenarioName::ALL {
            let n = if name == ScenarioName::GridLocations { 49 } else { 60 };
            let cfg = ScenarioConfig::new(name).with_n(n);
            let a = gen_scenario(&cfg, &mut RngStream::new(6, 2)).unwrap();
            let b = gen_scenario(&cfg, &mut RngStream::new(6, 2)).unwrap();
            assert_eq!(a, b, "{name}");
            a.dataset.validate().unwrap();
            assert_eq!(a.dataset.n_covariates(), 0);
            assert_eq!(ScenarioName::parse(name.as_str()), Some(name));
        }
    }

    #[test]
    fn cross_correlation_band() {
        let cfg = ScenarioConfig { sigma2_a: 0.0, ..ScenarioConfig::new(ScenarioName::Main).with_n(2000) };
        let mut rng = RngStream::new(8, 0);
        let s = sample_locations(cfg.n, LocationMode::Uniform, &mut rng).unwrap();
        let (a, z) = draw_joint_az(&s, &cfg.kernel_a, &cfg.kernel_z, cfg.rho, cfg.sigma2_a, &mut rng).unwrap();
        let (ma, mz) = (mean(&a), mean(&z));
        let cov: f64 = a.iter().zip(&z).map(|(x, y)| (x - ma) * (y - mz)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vz: f64 = z.iter().map(|y| (y - mz).powi(2)).sum();
        let r = cov / (va * vz).sqrt();
        assert!(r > 0.2 && r < 0.8, "correlation {r}");
    }
}
