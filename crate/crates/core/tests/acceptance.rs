//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The Monte Carlo criteria run 150 replications at n = 500 and take a
//! long time on few cores; the property checks finish in seconds.

use std::time::Instant;

use dsrkit::estimators::{
    crossfit_nuisance, dsr_crossfit_with, dsr_nocrossfit_with, dsr_theoretical_with, fit_gsem, gsem_point,
    partition_folds, sandwich_variance, theory_nuisance, Dataset, FixedKrigingLearner, KrigingLearner, MethodSpec,
    Smoother, TrainValidation, ZeroLearner, ZeroPredictor,
};
use dsrkit::harness::{run_study, MetricsRow, StudyMethod, StudyOutput};
use dsrkit::kernels::KernelSpec;
use dsrkit::numerics::{gaussian_loglik, Mat, RngStream};
use dsrkit::simgen::{ScenarioConfig, ScenarioName, Surface};
use dsrkit::smoothers::{theoretical_krige, tv_grid_sizes, Criterion, GpFit, GpOptions, TauMode};

const MC_REPS: usize = 150;
const MC_N: usize = 500;
const MC_SEED: u64 = 20_240_501;

struct Tally {
    failed: Vec<String>,
}

impl Tally {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

// ---------------------------------------------------------------------------
// independent dense oracles

type Dense = Vec<Vec<f64>>;

fn to_dense(m: &Mat<f64>) -> Dense {
    (0..m.nrows()).map(|i| m.row(i).to_vec()).collect()
}

/// Gauss-Jordan inverse with partial pivoting, plus the log-determinant.
fn gj_inverse(a: &Dense) -> (Dense, f64) {
    let n = a.len();
    let mut m: Dense = a.iter().cloned().collect();
    let mut inv: Dense = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        inv.swap(c, p);
        let d = m[c][c];
        log_det += d.abs().ln();
        for j in 0..n {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for j in 0..n {
                    m[r][j] -= f * m[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    (inv, log_det)
}

/// OLS coefficients and HC0 variance by explicit normal equations.
fn ols_oracle(x: &Dense, y: &[f64]) -> (Vec<f64>, Dense) {
    let (n, p) = (x.len(), x[0].len());
    let xtx: Dense = (0..p).map(|a| (0..p).map(|b| (0..n).map(|i| x[i][a] * x[i][b]).sum()).collect()).collect();
    let xty: Vec<f64> = (0..p).map(|a| (0..n).map(|i| x[i][a] * y[i]).sum()).collect();
    let (inv, _) = gj_inverse(&xtx);
    let beta: Vec<f64> = (0..p).map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let u: Vec<f64> = (0..n).map(|i| y[i] - (0..p).map(|b| x[i][b] * beta[b]).sum::<f64>()).collect();
    let meat: Dense =
        (0..p).map(|a| (0..p).map(|b| (0..n).map(|i| u[i] * u[i] * x[i][a] * x[i][b]).sum()).collect()).collect();
    let var: Dense = (0..p)
        .map(|a| {
            (0..p)
                .map(|b| (0..p).flat_map(|c| (0..p).map(move |d| (c, d))).map(|(c, d)| inv[a][c] * meat[c][d] * inv[b][d]).sum())
                .collect()
        })
        .collect();
    (beta, var)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn random_dataset(rng: &mut RngStream) -> Dataset<f64> {
    let n = 30 + (rng.uniform() * 60.0) as usize;
    let l = 1 + (rng.uniform() * 3.0) as usize;
    let p = (rng.uniform() * 3.0) as usize;
    let s = Mat::from_fn(n, 2, |_, _| rng.uniform());
    let z = Mat::from_fn(n, p, |_, _| rng.normal());
    let a = Mat::from_fn(n, l, |i, j| s[(i, j % 2)] + 0.5 * rng.normal() + 0.2);
    let y = (0..n)
        .map(|i| (0..l).map(|j| a[(i, j)]).sum::<f64>() + (3.0 * s[(i, 1)]).sin() + rng.normal())
        .collect();
    if p == 0 {
        Dataset::without_covariates(y, a, s).unwrap()
    } else {
        Dataset::new(y, a, z, s).unwrap()
    }
}

// ---------------------------------------------------------------------------
// property criteria

fn ols_reduction(t: &mut Tally) {
    let mut rng = RngStream::new(606, 0);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for case in 0..100 {
        let d = random_dataset(&mut rng);
        let (n, l) = (d.n(), d.n_treatments());
        let a_only: Dense = (0..n).map(|i| d.a.row(i).to_vec()).collect();
        let full: Dense = (0..n)
            .map(|i| d.a.row(i).iter().chain(d.z.row(i)).copied().chain([1.0]).collect())
            .collect();
        let (b_a, v_a) = ols_oracle(&a_only, &d.y);
        let (b_f, _) = ols_oracle(&full, &d.y);
        let mut r = RngStream::new(7, case);

        let cf = dsr_crossfit_with(&d, 3, &ZeroLearner, 0.95, &mut r).unwrap();
        let nc = dsr_nocrossfit_with(&d, &ZeroLearner, 0.95).unwrap();
        let th = dsr_theoretical_with(&d, 3, &ZeroPredictor, 0.95, &mut r).unwrap();
        let gs = gsem_point(&d, &Smoother::Zero).unwrap();
        for j in 0..l {
            let pairs = [
                (cf.beta_hat[j], b_a[j]),
                (nc.beta_hat[j], b_a[j]),
                (th.beta_hat[j], b_f[j]),
                (gs[j], b_f[j]),
            ];
            for jj in 0..l {
                for (got, want) in [(cf.var_hat[(j, jj)], v_a[j][jj]), (nc.var_hat[(j, jj)], v_a[j][jj])] {
                    worst = worst.max((got - want).abs() / (1.0 + want.abs()));
                    ok &= rel_close(got, want, 1e-10);
                }
            }
            for (got, want) in pairs {
                worst = worst.max((got - want).abs() / (1.0 + want.abs()));
                ok &= rel_close(got, want, 1e-10);
            }
        }
    }
    let gsem_boot = {
        let d = random_dataset(&mut RngStream::new(606, 1));
        fit_gsem(&d, &Smoother::Zero, 20, 0.95, &RngStream::new(1, 1)).is_ok()
    };
    t.check(
        "C6 OLS reduction",
        ok && gsem_boot,
        format!("100 random data sets, worst relative deviation {worst:.2e} (tolerance 1e-10)"),
    );
}

fn theory_variance_matches_intercept_ols(t: &mut Tally) {
    // the theory estimator reports the HC0 variance of the centered
    // regression, which equals the HC0 variance with an intercept column
    let mut rng = RngStream::new(607, 0);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d = random_dataset(&mut rng);
        let n = d.n();
        let full: Dense = (0..n)
            .map(|i| d.a.row(i).iter().chain(d.z.row(i)).copied().chain([1.0]).collect())
            .collect();
        let (_, v_f) = ols_oracle(&full, &d.y);
        let th = dsr_theoretical_with(&d, 3, &ZeroPredictor, 0.95, &mut RngStream::new(8, case)).unwrap();
        for j in 0..d.n_treatments() {
            for jj in 0..d.n_treatments() {
                worst = worst.max((th.var_hat[(j, jj)] - v_f[j][jj]).abs() / (1.0 + v_f[j][jj].abs()));
            }
        }
    }
    t.check(
        "C6 OLS reduction (theory variance)",
        worst <= 1e-10,
        format!("worst relative deviation {worst:.2e} (tolerance 1e-10)"),
    );
}

fn no_leakage(t: &mut Tally) {
    let mut rng = RngStream::new(707, 0);
    let n = 90;
    let s = Mat::from_fn(n, 2, |_, _| rng.uniform());
    let a = Mat::from_fn(n, 1, |i, _| (4.0 * s[(i, 0)]).sin() + 0.3 * rng.normal());
    let y: Vec<f64> = (0..n).map(|i| a[(i, 0)] + (3.0 * s[(i, 1)]).cos() + 0.3 * rng.normal()).collect();
    let d = Dataset::without_covariates(y, a, s).unwrap();
    let folds = partition_folds(n, 3, &mut RngStream::new(708, 0)).unwrap();
    let fixed = FixedKrigingLearner {
        outcome: KernelSpec::matern(1.5, 0.2).with_variances(1.0, 0.1),
        treatments: vec![KernelSpec::matern(1.5, 0.2).with_variances(1.0, 0.1)],
    };
    let reml = KrigingLearner { gp: GpOptions { tau_mode: TauMode::Fixed(1.5), budget: 60, ..GpOptions::default() } };

    let mut ok = true;
    for f in 0..3 {
        let rows = folds.members(f);
        let mut p = d.clone();
        for &i in &rows {
            p.y[i] += 10.0 * (i as f64 + 1.0);
            p.a[(i, 0)] -= 3.0;
        }
        for learner_out in [
            (crossfit_nuisance(&d, &folds, &fixed).unwrap(), crossfit_nuisance(&p, &folds, &fixed).unwrap()),
            (crossfit_nuisance(&d, &folds, &reml).unwrap(), crossfit_nuisance(&p, &folds, &reml).unwrap()),
        ] {
            let (base, pert) = learner_out;
            for &i in &rows {
                ok &= base.outcome_trend[i] == pert.outcome_trend[i];
                ok &= base.outcome_offset[i] == pert.outcome_offset[i];
                ok &= base.regressor_fit[(i, 0)] == pert.regressor_fit[(i, 0)];
            }
        }
    }
    // theory nuisance: same fold draw, perturbed fold rows
    let x = d.a.clone();
    let (h0, x0) = theory_nuisance(&d.y, &x, &d.s, 3, &TrainValidation, &mut RngStream::new(9, 9)).unwrap();
    let folds_t = partition_folds(n, 3, &mut RngStream::new(9, 9)).unwrap();
    let rows = folds_t.members(1);
    let mut y2 = d.y.clone();
    let mut x2 = x.clone();
    for &i in &rows {
        y2[i] *= -5.0;
        x2[(i, 0)] += 7.0;
    }
    let (h1, x1) = theory_nuisance(&y2, &x2, &d.s, 3, &TrainValidation, &mut RngStream::new(9, 9)).unwrap();
    for &i in &rows {
        ok &= h0[i] == h1[i] && x0[(i, 0)] == x1[(i, 0)];
    }
    t.check("C7 cross-fitting no leakage", ok, "fold predictions bit-identical under in-fold perturbation".into());
}

fn interpolation(t: &mut Tally) {
    let mut rng = RngStream::new(808, 0);
    let n = 40;
    let s = Mat::from_fn(n, 2, |_, _| rng.uniform());
    let y: Vec<f64> = (0..n).map(|i| (5.0 * s[(i, 0)]).sin() + s[(i, 1)] + 0.2 * rng.normal()).collect();
    let ones = Mat::from_fn(n, 1, |_, _| 1.0);
    let spec = KernelSpec::matern(1.5, 0.15).with_variances(1.0, 0.0);
    let fit = GpFit::with_spec(spec, &y, &ones, &s, Criterion::Reml).unwrap();
    let pred = fit.predict_mean(&s, &ones).unwrap();
    let gp_err = pred.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tk = theoretical_krige(&s, &s, &y, 0.1, 0.0).unwrap();
    let tk_err = tk.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    t.check(
        "C8 Kriging interpolation",
        gp_err <= 1e-6 && tk_err <= 1e-6,
        format!("max error {gp_err:.1e} (nugget 0), {tk_err:.1e} (ridge 0), tolerance 1e-6"),
    );
}

fn sandwich(t: &mut Tally) {
    let mut rng = RngStream::new(909, 0);
    let mut worst: f64 = 0.0;
    let mut symmetric = true;
    for _ in 0..20 {
        let n = 40;
        let v = Mat::from_fn(n, 3, |_, _| rng.normal());
        let m = Mat::from_fn(n, 3, |i, j| v[(i, j)] + 0.4 * rng.normal());
        let u: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let got = sandwich_variance(&v, &m, &u).unwrap();
        let mut vtm = vec![vec![0.0; 3]; 3];
        let mut meat = vec![vec![0.0; 3]; 3];
        for i in 0..n {
            for a in 0..3 {
                for b in 0..3 {
                    vtm[a][b] += v[(i, a)] * m[(i, b)];
                    meat[a][b] += u[i] * u[i] * v[(i, a)] * v[(i, b)];
                }
            }
        }
        let (br, _) = gj_inverse(&vtm);
        for a in 0..3 {
            for b in 0..3 {
                let mut w = 0.0;
                for c in 0..3 {
                    for e in 0..3 {
                        w += br[a][c] * meat[c][e] * br[b][e];
                    }
                }
                worst = worst.max((got[(a, b)] - w).abs() / (1.0 + w.abs()));
                symmetric &= got[(a, b)] == got[(b, a)];
            }
        }
    }
    t.check(
        "C9 sandwich variance",
        worst <= 1e-10 && symmetric,
        format!("worst deviation {worst:.1e} (tolerance 1e-10), symmetric: {symmetric}"),
    );
}

fn loglik(t: &mut Tally) {
    let mut rng = RngStream::new(1010, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let b = Mat::from_fn(5, 5, |_, _| rng.normal());
        let mut c = b.matmul(&b.transpose()).unwrap();
        c.add_diag(0.5);
        let c = c.symmetrized();
        let r: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let (inv, log_det) = gj_inverse(&to_dense(&c));
        let quad: f64 = (0..5).map(|i| (0..5).map(|j| r[i] * inv[i][j] * r[j]).sum::<f64>()).sum();
        let want = -0.5 * (5.0 * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
        let got = gaussian_loglik(&c, &r).unwrap();
        worst = worst.max((got - want).abs() / (1.0 + want.abs()));
    }
    t.check("C10 Gaussian log-likelihood", worst <= 1e-8, format!("worst deviation {worst:.1e} (tolerance 1e-8)"));
}

fn matern_forms(t: &mut Tally) {
    let gamma = 0.3;
    let half = KernelSpec::matern(0.5, gamma);
    let three_halves = KernelSpec::matern(1.5, gamma);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let h = 2.0 * k as f64 / 99.0;
        let e = (-h / gamma).exp();
        let r = 3f64.sqrt() * h / gamma;
        let p = (1.0 + r) * (-r).exp();
        worst = worst.max((half.correlation(h).unwrap() - e).abs());
        worst = worst.max((three_halves.correlation(h).unwrap() - p).abs());
    }
    t.check("C11 Matern closed forms", worst <= 1e-12, format!("worst deviation {worst:.1e} on 100 distances (tolerance 1e-12)"));
}

fn determinism(t: &mut Tally) {
    let cfg = ScenarioConfig::new(ScenarioName::Main).with_n(100);
    let methods = vec![
        StudyMethod::new(MethodSpec::Ols { robust: false }),
        StudyMethod::new(MethodSpec::Dsr {
            folds: 5,
            gp: GpOptions { tau_mode: TauMode::Fixed(1.5), budget: 60, ..GpOptions::default() },
            runs: 1,
        }),
        StudyMethod::new(MethodSpec::Gsem { smoother: Smoother::default(), bootstrap_b: 20 }),
        StudyMethod::new(MethodSpec::DsrTheory { folds: 5, runs: 1 }),
    ];
    let runs: Vec<StudyOutput> = [1, 4, 8].iter().map(|&th| run_study(&cfg, &methods, 10, 42, th).unwrap()).collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    t.check("C12 determinism across threads", same, "10-rep study with 1, 4 and 8 threads".into());
}

fn grid_sizes(t: &mut Tally) {
    let a = tv_grid_sizes(16).unwrap();
    let b = tv_grid_sizes(100).unwrap();
    t.check(
        "C13 tuning grid sizes",
        a == (8, 2) && b == (50, 5),
        format!("n=16 -> {a:?}, n=100 -> {b:?}"),
    );
}

// ---------------------------------------------------------------------------
// Monte Carlo criteria

fn study(label: &str, cfg: &ScenarioConfig, ids: &[&str]) -> StudyOutput {
    let methods: Vec<StudyMethod> = ids.iter().map(|id| StudyMethod::new(MethodSpec::from_id(id).unwrap())).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    let out = run_study(cfg, &methods, MC_REPS, MC_SEED, threads).unwrap();
    println!("  {label}: {MC_REPS} reps at n = {} in {:.0} s", cfg.n, start.elapsed().as_secs_f64());
    for r in &out.rows {
        println!(
            "    {:<12} bias {:+.3} rel {:+.3} mse {:.3} len {:.3} cvg {:.3} power {:.3} ok {} fail {}",
            r.method, r.bias, r.rel_bias, r.mse, r.ci_length, r.coverage, r.power, r.n_ok, r.n_fail
        );
    }
    out
}

fn row<'a>(out: &'a StudyOutput, id: &str) -> &'a MetricsRow {
    out.row(id).unwrap()
}

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

fn smooth_smooth(t: &mut Tally) {
    let cfg = ScenarioConfig::new(ScenarioName::Main).with_n(MC_N);
    let out = study("smooth/smooth", &cfg, &["lmm", "gsem", "dsr"]);
    let (dsr, lmm, gsem) = (row(&out, "dsr"), row(&out, "lmm"), row(&out, "gsem"));
    t.check(
        "C1 smooth/smooth DSR",
        dsr.rel_bias.abs() <= 0.20 && dsr.coverage >= 0.85,
        format!("|rel_bias| {:.3} (<= 0.20), coverage {:.3} (>= 0.85)", dsr.rel_bias.abs(), dsr.coverage),
    );
    t.check(
        "C1 smooth/smooth LMM",
        lmm.rel_bias.abs() >= 0.5 && lmm.coverage <= 0.35,
        format!("|rel_bias| {:.3} (>= 0.5), coverage {:.3} (<= 0.35)", lmm.rel_bias.abs(), lmm.coverage),
    );
    t.check(
        "C1 smooth/smooth DSR vs LMM bias",
        dsr.bias.abs() <= 0.4 * lmm.bias.abs(),
        format!("|bias| {:.3} vs 0.4 x {:.3} = {:.3}", dsr.bias.abs(), lmm.bias.abs(), 0.4 * lmm.bias.abs()),
    );
    t.check(
        "C4 gSEM vs DSR interval length",
        gsem.ci_length > dsr.ci_length,
        format!("gSEM {:.3} vs DSR {:.3}", gsem.ci_length, dsr.ci_length),
    );
    let z: Vec<f64> = out.estimates("dsr").iter().map(|e| (e.beta - cfg.beta0) / e.se).collect();
    let g1 = skewness(&z);
    t.check(
        "Normality sanity (DSR standardized errors)",
        g1.abs() <= 0.5,
        format!("|skewness| {:.3} over {} reps (<= 0.5)", g1.abs(), z.len()),
    );
}

fn high_variance(t: &mut Tally) {
    let cfg = ScenarioConfig::new(ScenarioName::HighVarA).with_n(MC_N);
    let out = study("high variance A", &cfg, &["ols", "dsr"]);
    let (dsr, ols) = (row(&out, "dsr"), row(&out, "ols"));
    t.check(
        "C2 high-variance DSR",
        dsr.coverage >= 0.88 && dsr.bias.abs() <= 0.05,
        format!("coverage {:.3} (>= 0.88), |bias| {:.3} (<= 0.05)", dsr.coverage, dsr.bias.abs()),
    );
    t.check("C2 high-variance OLS", ols.coverage <= 0.30, format!("coverage {:.3} (<= 0.30)", ols.coverage));
}

fn rough_rough(t: &mut Tally) {
    let cfg = ScenarioConfig::new(ScenarioName::Main).with_n(MC_N).with_surfaces(Surface::Rough, Surface::Rough);
    let out = study("rough/rough", &cfg, &["lmm", "dsr"]);
    let (dsr, lmm) = (row(&out, "dsr"), row(&out, "lmm"));
    t.check("C3 rough/rough MSE", dsr.mse <= lmm.mse, format!("DSR {:.3} vs LMM {:.3}", dsr.mse, lmm.mse));
    println!(
        "  note: rough/rough coverage DSR {:.3}, LMM {:.3} (neither is expected to be nominal)",
        dsr.coverage, lmm.coverage
    );
}

fn very_rough(t: &mut Tally) {
    let cfg = ScenarioConfig::new(ScenarioName::VeryRough).with_n(MC_N);
    let ids = ["ols", "lmm", "gsem", "spatialplus", "dsr", "dsr-theory"];
    let out = study("very rough", &cfg, &ids);
    let worst = ids.iter().map(|id| row(&out, id).rel_bias.abs()).fold(f64::INFINITY, f64::min);
    let detail: Vec<String> = ids.iter().map(|id| format!("{id} {:.3}", row(&out, id).rel_bias.abs())).collect();
    t.check("C5 very rough bias", worst >= 0.5, format!("|rel_bias| {} (all >= 0.5)", detail.join(", ")));
}

fn main() {
    // libtest flags such as --list or a name filter are accepted but the
    // suite always runs in full; listing prints nothing
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut t = Tally { failed: Vec::new() };
    let start = Instant::now();
    ols_reduction(&mut t);
    theory_variance_matches_intercept_ols(&mut t);
    no_leakage(&mut t);
    interpolation(&mut t);
    sandwich(&mut t);
    loglik(&mut t);
    matern_forms(&mut t);
    determinism(&mut t);
    grid_sizes(&mut t);
    println!("  property checks done in {:.1} s", start.elapsed().as_secs_f64());

    smooth_smooth(&mut t);
    high_variance(&mut t);
    rough_rough(&mut t);
    very_rough(&mut t);
    println!("  total {:.0} s", start.elapsed().as_secs_f64());

    if t.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", t.failed.len(), t.failed.join("; "));
        std::process::exit(1);
    }
}
