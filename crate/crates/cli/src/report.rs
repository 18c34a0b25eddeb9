use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dsrkit::estimators::MethodSpec;
use dsrkit::harness::MetricsRow;

use crate::format::{fixed3, g6};
use crate::plot;
use crate::simulate::{Manifest, MANIFEST_FILE, METRICS_FILE, METRICS_HEADER, REPS_FILE};
use crate::{CliResult, Failure, ReportFormat};

/// Scenario directories under `input`: `input` itself when it holds a
/// metrics file, otherwise its immediate subdirectories that do.
fn scenario_dirs(input: &Path) -> CliResult<Vec<PathBuf>> {
    if !input.is_dir() {
        return Err(Failure::Config(format!("{} is not a directory", input.display())));
    }
    if input.join(METRICS_FILE).is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(METRICS_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Config(format!("no {METRICS_FILE} found in {}", input.display())));
    }
    Ok(dirs)
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricsRow>> {
    let bad = |msg: String| Failure::Config(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(bad(format!("unexpected header, expected {}", METRICS_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| {
            parse_f64(&rec[k]).ok_or_else(|| bad(format!("line {line}: bad number `{}` in `{}`", &rec[k], METRICS_HEADER[k])))
        };
        let count = |k: usize| {
            rec[k].parse::<usize>().map_err(|_| bad(format!("line {line}: bad count `{}`", &rec[k])))
        };
        rows.push(MetricsRow {
            method: rec[0].to_string(),
            bias: num(1)?,
            rel_bias: num(2)?,
            mse: num(3)?,
            ci_length: num(4)?,
            coverage: num(5)?,
            power: num(6)?,
            n_ok: count(7)?,
            n_fail: count(8)?,
        });
    }
    Ok(rows)
}

fn label(method: &str) -> String {
    MethodSpec::from_id(method).map_or_else(|| method.to_string(), |m| m.label().to_string())
}

pub fn markdown(title: &str, rows: &[MetricsRow]) -> String {
    let mut s = format!("### {title}\n\n");
    s.push_str("| Method | Bias | Rel. Bias | MSE | CI Length | CVG | Power |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            label(&r.method),
            fixed3(r.bias),
            fixed3(r.rel_bias),
            fixed3(r.mse),
            fixed3(r.ci_length),
            fixed3(r.coverage),
            fixed3(r.power)
        ));
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.n_fail > 0)
        .map(|r| format!("{} {}/{}", label(&r.method), r.n_fail, r.n_ok + r.n_fail))
        .collect();
    if !failed.is_empty() {
        s.push_str(&format!("\nFailed replications: {}.\n", failed.join(", ")));
    }
    s
}

pub fn csv_text(rows: &[MetricsRow], scenario: Option<&str>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = METRICS_HEADER.to_vec();
    if scenario.is_some() {
        header.insert(0, "scenario");
    }
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.method.clone(),
            g6(r.bias),
            g6(r.rel_bias),
            g6(r.mse),
            g6(r.ci_length),
            g6(r.coverage),
            g6(r.power),
            r.n_ok.to_string(),
            r.n_fail.to_string(),
        ];
        if let Some(sc) = scenario {
            rec.insert(0, sc.to_string());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn scenario_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn run(input: &Path, format: ReportFormat, want_plot: bool) -> CliResult<()> {
    let dirs = scenario_dirs(input)?;
    let many = dirs.len() > 1;
    let mut out = String::new();
    for (i, dir) in dirs.iter().enumerate() {
        let rows = read_metrics(&dir.join(METRICS_FILE))?;
        let name = scenario_name(dir);
        match format {
            ReportFormat::Md => {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&markdown(&name, &rows));
            }
            ReportFormat::Csv => {
                let text = csv_text(&rows, many.then_some(name.as_str()));
                // a single header across scenarios
                let body = if i > 0 { text.split_once('\n').map_or("", |(_, b)| b).to_string() } else { text };
                out.push_str(&body);
            }
        }
    }
    if want_plot {
        for dir in &dirs {
            let reps = dir.join(REPS_FILE);
            if !reps.is_file() {
                return Err(Failure::Config(format!(
                    "--plot needs per-replication estimates but {} is missing; rerun simulate with --keep-reps",
                    reps.display()
                )));
            }
            let mpath = dir.join(MANIFEST_FILE);
            let text = fs::read_to_string(&mpath).map_err(|e| Failure::Config(format!("{}: {e}", mpath.display())))?;
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", mpath.display())))?;
            let draws = plot::read_draws(&reps, manifest.scenario.beta0)?;
            let svg = plot::density_svg(&scenario_name(dir), &draws, label)?;
            let target = dir.join("density.svg");
            fs::write(&target, svg).map_err(|e| Failure::Runtime(format!("{}: {e}", target.display())))?;
            eprintln!("wrote {}", target.display());
        }
    }
    std::io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| Failure::Runtime(format!("stdout: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, bias: f64, n_fail: usize) -> MetricsRow {
        MetricsRow {
            method: method.into(),
            bias,
            rel_bias: bias / 0.5,
            mse: 0.1,
            ci_length: 1.0,
            coverage: 0.95,
            power: f64::NAN,
            n_ok: 10,
            n_fail,
        }
    }

    #[test]
    fn markdown_layout() {
        let md = markdown("main", &[row("dsr", 0.0181, 0), row("gsem", 0.2, 2)]);
        let header = md.lines().nth(2).unwrap();
        assert_eq!(header, "| Method | Bias | Rel. Bias | MSE | CI Length | CVG | Power |");
        assert!(md.contains("| DSR | 0.018 | 0.036 | 0.100 | 1.000 | 0.950 | NA |"));
        assert!(md.contains("gSEM 2/12"));
    }
}
