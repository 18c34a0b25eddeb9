use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dsrkit::harness::{run_study, MetricsRow, StudyMethod, StudyOutput};
use dsrkit::simgen::ScenarioConfig;

use crate::config::{self, DEFAULT_REPS, DEFAULT_SEED};
use crate::format::g6;
use crate::{CliResult, Failure};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const REPS_FILE: &str = "reps.csv";
pub const METRICS_HEADER: [&str; 9] =
    ["method", "bias", "rel_bias", "mse", "ci_length", "coverage", "power", "n_ok", "n_fail"];

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub keep_reps: bool,
}

/// Everything needed to rerun one scenario of a study exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dsrkit_version: String,
    pub label: String,
    pub reps: usize,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub methods: Vec<StudyMethod>,
}

struct Plan {
    runs: Vec<Manifest>,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

fn load_plan(path: &Path, args: &SimulateArgs) -> CliResult<Plan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let is_manifest = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut plan = if is_manifest {
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: line {}: {e}", path.display(), e.line())))?;
        m.scenario.validate().map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        if m.methods.is_empty() {
            return Err(Failure::Config(format!("{}: no methods", path.display())));
        }
        Plan { runs: vec![m], threads: None, out: None }
    } else {
        let study = config::parse_study(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let methods: Vec<StudyMethod> = study
            .methods
            .iter()
            .map(|m| config::resolve_method(m).expect("validated"))
            .collect();
        let runs = study
            .scenarios
            .iter()
            .map(|s| Manifest {
                dsrkit_version: env!("CARGO_PKG_VERSION").to_string(),
                label: config::scenario_label(s),
                reps: study.reps.unwrap_or(DEFAULT_REPS),
                seed: study.seed.unwrap_or(DEFAULT_SEED),
                scenario: config::resolve_scenario(s).expect("validated"),
                methods: methods.clone(),
            })
            .collect();
        Plan { runs, threads: study.threads, out: study.out }
    };
    for m in &mut plan.runs {
        if let Some(r) = args.reps {
            m.reps = r;
        }
        if let Some(s) = args.seed {
            m.seed = s;
        }
        if m.reps == 0 {
            return Err(Failure::Config("reps must be at least 1".into()));
        }
    }
    Ok(plan)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(METRICS_HEADER).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            g6(r.bias),
            g6(r.rel_bias),
            g6(r.mse),
            g6(r.ci_length),
            g6(r.coverage),
            g6(r.power),
            r.n_ok.to_string(),
            r.n_fail.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_reps(path: &Path, study: &StudyOutput) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["rep", "method", "status", "beta", "se", "lower", "upper"])
        .map_err(|e| io_err(path, e))?;
    for rec in &study.reps {
        for o in &rec.outcomes {
            let row = match &o.result {
                Ok(e) => [
                    rec.rep.to_string(),
                    o.method.clone(),
                    "ok".into(),
                    g6(e.beta),
                    g6(e.se),
                    g6(e.lower),
                    g6(e.upper),
                ],
                Err(name) => [
                    rec.rep.to_string(),
                    o.method.clone(),
                    name.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            w.write_record(&row).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let plan = load_plan(&args.config, args)?;
    let threads = args
        .threads
        .or(plan.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = args.out.clone().or(plan.out).unwrap_or_else(|| PathBuf::from("results"));
    for m in &plan.runs {
        let dir = out.join(&m.label);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        log::info!("{}: {} reps of {} methods on {threads} threads", m.label, m.reps, m.methods.len());
        let study = run_study(&m.scenario, &m.methods, m.reps, m.seed, threads)
            .map_err(|e| Failure::Runtime(format!("{}: {}: {e}", m.label, e.name())))?;
        write_metrics(&dir.join(METRICS_FILE), &study.rows)?;
        let manifest = serde_json::to_string_pretty(m).expect("manifest serializes") + "\n";
        let mpath = dir.join(MANIFEST_FILE);
        fs::write(&mpath, manifest).map_err(|e| io_err(&mpath, e))?;
        if args.keep_reps {
            write_reps(&dir.join(REPS_FILE), &study)?;
        }
        for r in study.rows.iter().filter(|r| r.n_fail > 0) {
            log::warn!("{}: {} failed in {} of {} replications", m.label, r.method, r.n_fail, m.reps);
        }
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}
