//! Monte Carlo study runner and the summary metrics of a study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_method, MethodSpec};
use crate::numerics::RngStream;
use crate::simgen::{gen_scenario, ScenarioConfig};

/// Confidence level used by every study.
pub const STUDY_LEVEL: f64 = 0.95;

/// A named estimator configuration within a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMethod {
    pub name: String,
    pub spec: MethodSpec,
}

impl StudyMethod {
    pub fn new(spec: MethodSpec) -> Self {
        Self { name: spec.id().to_string(), spec }
    }

    pub fn named(name: impl Into<String>, spec: MethodSpec) -> Self {
        Self { name: name.into(), spec }
    }
}

/// First-treatment estimate from one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepEstimate {
    pub beta: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    /// `Ok` estimate or the error name.
    pub result: std::result::Result<RepEstimate, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub outcomes: Vec<MethodOutcome>,
}

/// One replication: the data set comes from `(base_seed, rep)` substream 0,
/// method `m` draws from substream `m + 1`. Failures are recorded and do
/// not affect the other methods.
pub fn run_replication(
    config: &ScenarioConfig,
    methods: &[StudyMethod],
    rep: usize,
    base_seed: u64,
) -> RepRecord {
    let root = RngStream::new(base_seed, rep as u64);
    let scenario = gen_scenario(config, &mut root.substream(0));
    let outcomes = methods
        .iter()
        .enumerate()
        .map(|(m, sm)| {
            let result = match &scenario {
                Err(e) => Err(e.name().to_string()),
                Ok(sc) => match fit_method(&sm.spec, &sc.dataset, STUDY_LEVEL, &root.substream(m as u64 + 1)) {
                    Ok(r) => Ok(RepEstimate {
                        beta: r.beta_hat[0],
                        se: r.se()[0],
                        lower: r.ci_lower[0],
                        upper: r.ci_upper[0],
                    }),
                    Err(e) => {
                        log::debug!("rep {rep}, {}: {e}", sm.name);
                        Err(e.name().to_string())
                    }
                },
            };
            MethodOutcome { method: sm.name.clone(), result }
        })
        .collect();
    RepRecord { rep, outcomes }
}

/// Summary of one method over a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub bias: f64,
    pub rel_bias: f64,
    pub mse: f64,
    pub ci_length: f64,
    pub coverage: f64,
    pub power: f64,
    pub n_ok: usize,
    pub n_fail: usize,
}

impl MetricsRow {
    /// Row for a method with no successful replication.
    pub fn failed(method: &str, n_fail: usize) -> Self {
        Self {
            method: method.to_string(),
            bias: f64::NAN,
            rel_bias: f64::NAN,
            mse: f64::NAN,
            ci_length: f64::NAN,
            coverage: f64::NAN,
            power: f64::NAN,
            n_ok: 0,
            n_fail,
        }
    }
}

/// Bias, relative bias, MSE, mean interval length, coverage of `beta0` and
/// power (intervals excluding zero). `rel_bias` is NaN when `beta0 = 0`.
pub fn compute_metrics(method: &str, estimates: &[RepEstimate], n_fail: usize, beta0: f64) -> Result<MetricsRow> {
    if estimates.is_empty() {
        return Err(Error::AllFailed);
    }
    let k = estimates.len() as f64;
    let avg = |f: &dyn Fn(&RepEstimate) -> f64| estimates.iter().map(f).sum::<f64>() / k;
    let bias = avg(&|e| e.beta) - beta0;
    Ok(MetricsRow {
        method: method.to_string(),
        bias,
        rel_bias: if beta0 != 0.0 { bias / beta0 } else { f64::NAN },
        mse: avg(&|e| (e.beta - beta0).powi(2)),
        ci_length: avg(&|e| e.upper - e.lower),
        coverage: avg(&|e| f64::from(u8::from(e.lower <= beta0 && beta0 <= e.upper))),
        power: avg(&|e| f64::from(u8::from(e.lower > 0.0 || e.upper < 0.0))),
        n_ok: estimates.len(),
        n_fail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub rows: Vec<MetricsRow>,
    pub reps: Vec<RepRecord>,
}

impl StudyOutput {
    /// Successful estimates of one method, in replication order.
    pub fn estimates(&self, method: &str) -> Vec<RepEstimate> {
        self.reps
            .iter()
            .flat_map(|r| r.outcomes.iter())
            .filter(|o| o.method == method)
            .filter_map(|o| o.result.as_ref().ok().copied())
            .collect()
    }

    pub fn row(&self, method: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Runs `reps` replications on a pool of `threads` workers. The output
/// depends only on `(config, methods, reps, base_seed)`.
pub fn run_study(
    config: &ScenarioConfig,
    methods: &[StudyMethod],
    reps: usize,
    base_seed: u64,
    threads: usize,
) -> Result<StudyOutput> {
    if methods.is_empty() {
        return Err(Error::EmptyInput("no methods".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let records: Vec<RepRecord> = pool.install(|| {
        (0..reps).into_par_iter().map(|r| run_replication(config, methods, r, base_seed)).collect()
    });
    let mut out = StudyOutput { rows: Vec::with_capacity(methods.len()), reps: records };
    for m in methods {
        let est = out.estimates(&m.name);
        let n_fail = reps - est.len();
        let row = match compute_metrics(&m.name, &est, n_fail, config.beta0) {
            Ok(r) => r,
            Err(Error::AllFailed) => MetricsRow::failed(&m.name, n_fail),
            Err(e) => return Err(e),
        };
        out.rows.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::ScenarioName;

    fn est(beta: f64, lower: f64, upper: f64) -> RepEstimate {
        RepEstimate { beta, se: 0.0, lower, upper }
    }

    #[test]
    fn hand_metrics() {
        let r = compute_metrics("x", &[est(0.4, 0.3, 0.6), est(0.6, 0.4, 0.7)], 0, 0.5).unwrap();
        assert!(r.bias.abs() < 1e-15);
        assert!((r.mse - 0.01).abs() < 1e-15);
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.power, 1.0);
        assert!((r.ci_length - 0.3).abs() < 1e-15);
        let b = compute_metrics("x", &[est(0.75, -1.0, 1.0)], 0, 0.5).unwrap();
        assert!((b.rel_bias - 0.5).abs() < 1e-15);
        assert_eq!(b.power, 0.0);
        assert!(matches!(compute_metrics("x", &[], 3, 0.5), Err(Error::AllFailed)));
    }

    #[test]
    fn failures_are_isolated() {
        let cfg = ScenarioConfig::new(ScenarioName::Main).with_n(40);
        let methods = vec![
            StudyMethod::new(MethodSpec::Ols { robust: false }),
            StudyMethod::named("bad", MethodSpec::DsrTheory { folds: 100, runs: 1 }),
        ];
        let a = run_replication(&cfg, &methods, 3, 11);
        let b = run_replication(&cfg, &methods, 3, 11);
        assert_eq!(a, b);
        assert!(a.outcomes[0].result.is_ok());
        assert_eq!(a.outcomes[1].result, Err("BadFoldCount".to_string()));
        let study = run_study(&cfg, &methods, 2, 11, 1).unwrap();
        let bad = study.row("bad").unwrap();
        assert_eq!((bad.n_ok, bad.n_fail), (0, 2));
        assert!([0.0, 0.5, 1.0].contains(&study.row("ols").unwrap().coverage));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = ScenarioConfig::new(ScenarioName::HighVarA).with_n(40);
        let methods = vec![
            StudyMethod::new(MethodSpec::Ols { robust: true }),
            StudyMethod::new(MethodSpec::DsrTheory { folds: 2, runs: 1 }),
        ];
        let one = run_study(&cfg, &methods, 4, 5, 1).unwrap();
        let three = run_study(&cfg, &methods, 4, 5, 3).unwrap();
        assert_eq!(one, three);
        for r in &one.rows {
            assert!(r.mse >= r.bias * r.bias);
        }
    }
}
