use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use dsrkit::estimators::{default_gp, fit_method, MethodSpec, Smoother, SpatialPlusOptions};
use dsrkit::numerics::{Mat, RngStream};
use dsrkit::smoothers::{SplineSmoother, TauMode};
use dsrkit::{Dataset, EstimateResult};

use crate::format::g6;
use crate::{CliResult, Failure};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Comma-separated treatment columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub treatments: Vec<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Comma-separated coordinate columns, e.g. `x,y`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub coords: Vec<String>,
    #[arg(long, default_value = "dsr")]
    pub method: String,
    #[arg(long, default_value_t = dsrkit::estimators::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Independent fold splits, combined by their median.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// `profile` or a fixed Matérn smoothness.
    #[arg(long, default_value = "profile")]
    pub tau_mode: String,
    /// Bootstrap replicates for gsem and spatialplus.
    #[arg(long, default_value_t = dsrkit::estimators::DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// Heteroskedasticity-robust OLS variance.
    #[arg(long)]
    pub robust: bool,
    /// Write the full result as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write per-row residuals as CSV.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

/// Reads the named numeric columns. Missing or non-numeric cells are
/// schema errors reported with their line number.
pub fn load_columns(path: &Path, names: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let bad = |msg: String| Failure::Config(format!("{}: {msg}", path.display()));
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).ok_or_else(|| bad(format!("no column named `{n}`"))))
        .collect::<CliResult<Vec<usize>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    let mut missing = Vec::new();
    for (r, rec) in rd.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| bad(format!("line {line}: {e}")))?;
        for (c, &k) in idx.iter().enumerate() {
            let cell = rec.get(k).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                missing.push(line);
                break;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => cols[c].push(v),
                _ => return Err(bad(format!("line {line}: column `{}` is not a finite number: `{cell}`", names[c]))),
            }
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(20).map(|l| l.to_string()).collect();
        let more = if missing.len() > 20 { format!(" and {} more", missing.len() - 20) } else { String::new() };
        return Err(bad(format!("missing values on lines {}{more}", shown.join(", "))));
    }
    if cols[0].is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(cols)
}

fn block(cols: &[Vec<f64>]) -> Mat<f64> {
    let n = cols.first().map_or(0, Vec::len);
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn method_spec(args: &FitArgs) -> CliResult<MethodSpec> {
    let mut gp = default_gp();
    gp.tau_mode = TauMode::parse(&args.tau_mode)
        .ok_or_else(|| Failure::Config(format!("bad --tau-mode `{}`", args.tau_mode)))?;
    let spec = match args.method.as_str() {
        "ols" => MethodSpec::Ols { robust: args.robust },
        "lmm" => MethodSpec::Lmm { gp },
        "gsem" => MethodSpec::Gsem { smoother: Smoother::Spline(SplineSmoother::default()), bootstrap_b: args.bootstrap },
        "spatialplus" => MethodSpec::Spatialplus { options: SpatialPlusOptions::default(), bootstrap_b: args.bootstrap },
        "dsr" => MethodSpec::Dsr { folds: args.folds, gp, runs: args.runs },
        "dsr-nocrossfit" => MethodSpec::DsrNocrossfit { gp },
        "dsr-theory" => MethodSpec::DsrTheory { folds: args.folds, runs: args.runs },
        other => {
            return Err(Failure::Config(format!(
                "unknown method `{other}` (known: {})",
                MethodSpec::IDS.join(", ")
            )))
        }
    };
    if args.runs == 0 {
        return Err(Failure::Config("--runs must be at least 1".into()));
    }
    if args.runs > 1 && !matches!(spec, MethodSpec::Dsr { .. } | MethodSpec::DsrTheory { .. }) {
        return Err(Failure::Config(format!("--runs applies only to dsr and dsr-theory, not {}", args.method)));
    }
    Ok(spec)
}

fn write_diagnostics(path: &Path, res: &EstimateResult, treatments: &[String]) -> CliResult<()> {
    let io = |e: csv::Error| Failure::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let trend = &res.diagnostics.outcome_trend;
    let mut header = vec!["row".to_string(), "residual".to_string()];
    header.extend(treatments.iter().map(|t| format!("residual_{t}")));
    if !trend.is_empty() {
        header.push("outcome_trend".into());
    }
    w.write_record(&header).map_err(io)?;
    for i in 0..res.residuals_u.len() {
        let mut rec = vec![(i + 1).to_string(), g6(res.residuals_u[i])];
        if res.residuals_v.nrows() == res.residuals_u.len() {
            rec.extend((0..res.residuals_v.ncols()).map(|j| g6(res.residuals_v[(i, j)])));
        } else {
            rec.extend(treatments.iter().map(|_| String::new()));
        }
        if let Some(t) = trend.get(i) {
            rec.push(g6(*t));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let spec = method_spec(args)?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Failure::Config(format!("--level must be in (0, 1), got {}", args.level)));
    }
    let mut names: Vec<&str> = vec![args.response.as_str()];
    names.extend(args.treatments.iter().map(String::as_str));
    names.extend(args.covariates.iter().map(String::as_str));
    names.extend(args.coords.iter().map(String::as_str));
    let cols = load_columns(&args.data, &names)?;
    let (l, p) = (args.treatments.len(), args.covariates.len());
    let y = cols[0].clone();
    let a = block(&cols[1..1 + l]);
    let s = block(&cols[1 + l + p..]);
    let data = if p == 0 {
        Dataset::without_covariates(y, a, s)
    } else {
        Dataset::new(y, a, block(&cols[1 + l..1 + l + p]), s)
    }
    .map_err(|e| Failure::Config(format!("{}: {e}", args.data.display())))?;

    let rng = RngStream::new(args.seed, 0);
    let res = fit_method(&spec, &data, args.level, &rng)
        .map_err(|e| Failure::Runtime(format!("{} failed: {}: {e}", spec.id(), e.name())))?;

    println!("method,{}", spec.label());
    println!("n,{}", data.n());
    println!("level,{}", g6(args.level));
    println!("term,estimate,se,lower,upper");
    let se = res.se();
    for (j, t) in args.treatments.iter().enumerate() {
        println!("{t},{},{},{},{}", g6(res.beta_hat[j]), g6(se[j]), g6(res.ci_lower[j]), g6(res.ci_upper[j]));
    }
    for note in &res.diagnostics.notes {
        log::info!("{note}");
    }
    if let Some(path) = &args.output {
        let json = serde_json::to_string_pretty(&res).expect("result serializes") + "\n";
        fs::write(path, json).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.diagnostics {
        write_diagnostics(path, &res, &args.treatments)?;
    }
    Ok(())
}
