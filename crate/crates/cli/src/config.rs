//! Study configuration files.
//!
//! A study is a TOML document with top-level run settings, one or more
//! `[[scenario]]` tables and one or more `[[method]]` tables. Unknown keys
//! are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use dsrkit::estimators::{default_gp, MethodSpec, Smoother, SpatialPlusOptions};
use dsrkit::harness::StudyMethod;
use dsrkit::kernels::{KernelFamily, KernelSpec};
use dsrkit::simgen::{ScenarioConfig, ScenarioName, Surface};
use dsrkit::smoothers::{Criterion, GpOptions, SplineSmoother, TauMode};

use crate::Failure;

pub const DEFAULT_REPS: usize = 400;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(rename = "method", default)]
    pub methods: Vec<MethodEntry>,
}

/// A named surface preset or an explicit kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Preset(String),
    Explicit {
        family: String,
        gamma: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

fn default_tau() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub name: Spanned<String>,
    /// Output subdirectory; defaults to the scenario name.
    pub label: Option<String>,
    pub n: Option<usize>,
    pub rho: Option<f64>,
    pub sigma2_a: Option<f64>,
    pub sigma2_y: Option<f64>,
    pub beta0: Option<f64>,
    pub kernel_a: Option<KernelChoice>,
    pub kernel_z: Option<KernelChoice>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub name: Spanned<String>,
    /// Column label in the outputs; defaults to the method id.
    pub label: Option<String>,
    pub folds: Option<usize>,
    pub runs: Option<usize>,
    pub tau_mode: Option<String>,
    pub kernel: Option<String>,
    pub criterion: Option<String>,
    pub budget: Option<usize>,
    pub bootstrap_b: Option<usize>,
    pub robust: Option<bool>,
    pub smoother: Option<String>,
    pub knots: Option<usize>,
}

/// 1-based line of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at<T>(text: &str, span: &Spanned<T>, msg: String) -> Failure {
    Failure::Config(format!("line {}: {msg}", line_of(text, span.span().start)))
}

pub fn parse_study(text: &str) -> Result<StudyFile, Failure> {
    let study: StudyFile = toml::from_str(text).map_err(|e| Failure::Config(e.to_string().trim_end().to_string()))?;
    if study.scenarios.is_empty() {
        return Err(Failure::Config("at least one [[scenario]] table is required".into()));
    }
    if study.methods.is_empty() {
        return Err(Failure::Config("at least one [[method]] table is required".into()));
    }
    for s in &study.scenarios {
        resolve_scenario(s).map_err(|m| at(text, &s.name, m))?;
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in &study.methods {
        let sm = resolve_method(m).map_err(|msg| at(text, &m.name, msg))?;
        if !seen.insert(sm.name.clone()) {
            return Err(at(text, &m.name, format!("duplicate method label `{}`", sm.name)));
        }
    }
    let mut labels = std::collections::BTreeSet::new();
    for s in &study.scenarios {
        if !labels.insert(scenario_label(s)) {
            return Err(at(text, &s.name, format!("duplicate scenario label `{}`", scenario_label(s))));
        }
    }
    Ok(study)
}

pub fn scenario_label(s: &ScenarioEntry) -> String {
    s.label.clone().unwrap_or_else(|| s.name.get_ref().clone())
}

fn kernel_of(choice: &KernelChoice) -> Result<KernelSpec<f64>, String> {
    let k = match choice {
        KernelChoice::Preset(p) => Surface::parse(p)
            .ok_or_else(|| format!("unknown surface `{p}` (expected smooth, rough or very_rough)"))?
            .kernel(),
        KernelChoice::Explicit { family, gamma, tau } => {
            let fam = KernelFamily::parse(family).ok_or_else(|| format!("unknown kernel family `{family}`"))?;
            KernelSpec::new(fam, *gamma, *tau)
        }
    };
    k.validate().map_err(|e| e.to_string())?;
    Ok(k)
}

pub fn resolve_scenario(s: &ScenarioEntry) -> Result<ScenarioConfig, String> {
    let name = ScenarioName::parse(s.name.get_ref()).ok_or_else(|| {
        let known: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
        format!("unknown scenario `{}` (known: {})", s.name.get_ref(), known.join(", "))
    })?;
    let mut c = ScenarioConfig::new(name);
    if let Some(v) = s.n {
        c.n = v;
    }
    if let Some(v) = s.rho {
        c.rho = v;
    }
    if let Some(v) = s.sigma2_a {
        c.sigma2_a = v;
    }
    if let Some(v) = s.sigma2_y {
        c.sigma2_y = v;
    }
    if let Some(v) = s.beta0 {
        c.beta0 = v;
    }
    if let Some(k) = &s.kernel_a {
        c.kernel_a = kernel_of(k)?;
    }
    if let Some(k) = &s.kernel_z {
        c.kernel_z = kernel_of(k)?;
    }
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn gp_options(m: &MethodEntry) -> Result<GpOptions, String> {
    let mut gp = default_gp();
    if let Some(t) = &m.tau_mode {
        gp.tau_mode = TauMode::parse(t).ok_or_else(|| format!("bad tau_mode `{t}` (expected `profile` or a number)"))?;
    }
    if let Some(k) = &m.kernel {
        gp.family = KernelFamily::parse(k).ok_or_else(|| format!("unknown kernel family `{k}`"))?;
    }
    if let Some(c) = &m.criterion {
        gp.criterion = match c.to_ascii_lowercase().as_str() {
            "reml" => Criterion::Reml,
            "ml" => Criterion::Ml,
            _ => return Err(format!("unknown criterion `{c}` (expected reml or ml)")),
        };
    }
    if let Some(b) = m.budget {
        gp.budget = b;
    }
    Ok(gp)
}

fn smoother_of(m: &MethodEntry) -> Result<Smoother, String> {
    let knots = m.knots.unwrap_or(SplineSmoother::default().knots);
    match m.smoother.as_deref().unwrap_or("spline") {
        "spline" => Ok(Smoother::Spline(SplineSmoother { knots })),
        "gp" => Ok(Smoother::Gp(gp_options(m)?)),
        other => Err(format!("unknown smoother `{other}` (expected spline or gp)")),
    }
}

/// Method id and options, rejecting options the method does not use.
pub fn resolve_method(m: &MethodEntry) -> Result<StudyMethod, String> {
    let id = m.name.get_ref().as_str();
    let allowed: &[&str] = match id {
        "ols" => &["robust"],
        "lmm" | "dsr-nocrossfit" => &["tau_mode", "kernel", "criterion", "budget"],
        "gsem" => &["bootstrap_b", "smoother", "knots", "tau_mode", "kernel", "criterion", "budget"],
        "spatialplus" => &["bootstrap_b", "knots"],
        "dsr" => &["folds", "runs", "tau_mode", "kernel", "criterion", "budget"],
        "dsr-theory" => &["folds", "runs"],
        _ => {
            return Err(format!("unknown method `{id}` (known: {})", MethodSpec::IDS.join(", ")));
        }
    };
    let given = [
        ("folds", m.folds.is_some()),
        ("runs", m.runs.is_some()),
        ("tau_mode", m.tau_mode.is_some()),
        ("kernel", m.kernel.is_some()),
        ("criterion", m.criterion.is_some()),
        ("budget", m.budget.is_some()),
        ("bootstrap_b", m.bootstrap_b.is_some()),
        ("robust", m.robust.is_some()),
        ("smoother", m.smoother.is_some()),
        ("knots", m.knots.is_some()),
    ];
    for (key, present) in given {
        if present && !allowed.contains(&key) {
            return Err(format!("option `{key}` does not apply to method `{id}`"));
        }
    }
    let folds = m.folds.unwrap_or(dsrkit::estimators::DEFAULT_FOLDS);
    let runs = m.runs.unwrap_or(1);
    let b = m.bootstrap_b.unwrap_or(dsrkit::estimators::DEFAULT_BOOTSTRAP);
    if runs == 0 {
        return Err("runs must be at least 1".into());
    }
    if folds < 2 {
        return Err("folds must be at least 2".into());
    }
    if b < 10 {
        return Err("bootstrap_b must be at least 10".into());
    }
    let spec = match id {
        "ols" => MethodSpec::Ols { robust: m.robust.unwrap_or(false) },
        "lmm" => MethodSpec::Lmm { gp: gp_options(m)? },
        "dsr-nocrossfit" => MethodSpec::DsrNocrossfit { gp: gp_options(m)? },
        "gsem" => MethodSpec::Gsem { smoother: smoother_of(m)?, bootstrap_b: b },
        "spatialplus" => {
            let knots = m.knots.unwrap_or(SplineSmoother::default().knots);
            MethodSpec::Spatialplus {
                options: SpatialPlusOptions {
                    treatment_smoother: Smoother::Spline(SplineSmoother { knots }),
                    knots,
                },
                bootstrap_b: b,
            }
        }
        "dsr" => MethodSpec::Dsr { folds, gp: gp_options(m)?, runs },
        _ => MethodSpec::DsrTheory { folds, runs },
    };
    Ok(StudyMethod::named(m.label.clone().unwrap_or_else(|| id.to_string()), spec))
}
