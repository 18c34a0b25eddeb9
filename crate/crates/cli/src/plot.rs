//! Kernel density plot of `β̂ − β₀` per method, as a standalone SVG 1.1 file.

use std::fmt::Write;
use std::path::Path;

use crate::{CliResult, Failure};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const GRID: usize = 256;
const COLORS: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

/// Centered estimates per method, in order of first appearance. Failed
/// replications are skipped.
pub fn read_draws(path: &Path, beta0: f64) -> CliResult<Vec<(String, Vec<f64>)>> {
    let bad = |msg: String| Failure::Config(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 4 {
            return Err(bad(format!("line {}: expected 7 fields", i + 2)));
        }
        if &rec[2] != "ok" {
            continue;
        }
        let b: f64 = rec[3].parse().map_err(|_| bad(format!("line {}: bad estimate `{}`", i + 2, &rec[3])))?;
        let method = &rec[1];
        match out.iter_mut().find(|(m, _)| m == method) {
            Some((_, v)) => v.push(b - beta0),
            None => out.push((method.to_string(), vec![b - beta0])),
        }
    }
    Ok(out)
}

/// Silverman's rule of thumb.
fn bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(s.len() - 1);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn kde(x: &[f64], bw: f64, at: f64) -> f64 {
    let c = 1.0 / (x.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    c * x.iter().map(|v| (-0.5 * ((at - v) / bw).powi(2)).exp()).sum::<f64>()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn density_svg(
    title: &str,
    draws: &[(String, Vec<f64>)],
    label: impl Fn(&str) -> String,
) -> CliResult<String> {
    let curves: Vec<(&str, &[f64], f64)> = draws
        .iter()
        .filter_map(|(m, x)| {
            let usable = x.len() >= 2 && x.iter().all(|v| v.is_finite());
            let bw = if usable { bandwidth(x) } else { 0.0 };
            if bw > 0.0 {
                Some((m.as_str(), x.as_slice(), bw))
            } else {
                log::warn!("{m}: too few distinct estimates for a density");
                None
            }
        })
        .collect();
    if curves.is_empty() {
        return Err(Failure::Config("no method has enough successful replications to plot".into()));
    }
    let lo = curves.iter().map(|(_, x, bw)| x.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bw).fold(f64::INFINITY, f64::min);
    let hi = curves.iter().map(|(_, x, bw)| x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw).fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = (0..GRID).map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64).collect();
    let dens: Vec<Vec<f64>> = curves.iter().map(|(_, x, bw)| grid.iter().map(|&g| kde(x, *bw, g)).collect()).collect();
    let ymax = dens.iter().flatten().copied().fold(0.0, f64::max) * 1.05;

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - lo) / (hi - lo) * pw;
    let py = |y: f64| TOP + ph - y / ymax * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">Sampling distribution of estimate minus truth: {}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let x = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#,
            px(x),
            TOP + ph + 18.0,
            x
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{TOP}" x2="{0:.1}" y2="{1:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
            px(0.0),
            TOP + ph
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">estimate minus truth</text>"#,
        LEFT + pw / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">density</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (c, ((m, x, _), d)) in curves.iter().zip(&dens).enumerate() {
        let color = COLORS[c % COLORS.len()];
        let pts: Vec<String> = grid.iter().zip(d).map(|(&g, &v)| format!("{:.2},{:.2}", px(g), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 20.0 * c as f64;
        let lx = W - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{} (n={})</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&label(m)),
            x.len()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
