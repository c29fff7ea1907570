//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported but do not fail the process unless
//! `FBMDRIFT_ACCEPTANCE_STRICT=1` is set, so `cargo test` still runs the
//! remaining targets. The summary line counts both. Positional arguments
//! such as `C9` restrict the run to those criteria.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use fbmdrift::ergodic::{fou_stationary_variance, step_average, theorem_covered, time_average, TestFunction};
use fbmdrift::estimator::{decompose, nw_estimate, smoothing_oracle, Decomposer, EstimatorConfig, EstimatorMode};
use fbmdrift::fbm::{holder_coefficient_of, HurstIndex};
use fbmdrift::harness::selftest::brownian_increment_checks;
use fbmdrift::harness::{
    emit_report, run_experiment, run_selftest, ConvergenceReport, ExperimentPlan, ReportFormat, SelfTestConfig, Tasks,
};
use fbmdrift::malliavin::MalliavinProfile;
use fbmdrift::models::{DriftModel, Kernel};
use fbmdrift::rng::SeedStream;
use fbmdrift::sde::{make_grid, simulate, ObservationGrid, SdeParams};
use fbmdrift::stats::{mean, std_err, ANDERSON_DARLING_CRITICAL_1PCT};
use fbmdrift::{Error, Result};
use rand::Rng;

/// Base seed of every acceptance run; the committed pilot used 9001.
const SEED: u64 = 7;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn plans_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans")
}

fn fou() -> DriftModel<f64> {
    DriftModel::linear(1.0).unwrap()
}

fn hurst(h: f64) -> HurstIndex<f64> {
    HurstIndex::new(h).unwrap()
}

fn c1_fbm_exactness() -> Result<Outcome> {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [0.6, 0.75, 0.9] {
        let cfg = SelfTestConfig {
            hurst: h,
            ..SelfTestConfig::default()
        };
        let report = run_selftest(&cfg)?;
        let stat = |name: &str| report.checks.iter().find(|c| c.name == name).map(|c| c.statistic).unwrap_or(f64::NAN);
        let circ = stat("covariance vs R_H (circulant)");
        let agree = stat("cholesky vs circulant covariance");
        // standard error of the (T, T) entry, for scale
        let t = cfg.n as f64 * cfg.dt;
        let se = t.powf(2.0 * h) * (2.0 / cfg.paths as f64).sqrt();
        ok &= circ <= cfg.tolerance && agree <= cfg.tolerance;
        parts.push(format!("H={h}: |emp-R_H|={circ:.3} |chol-circ|={agree:.3} (SE of Var B_T {se:.3})"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 120.0;
    outcome(ok, format!("{}; tol 0.02; {secs:.0}s of 120s", parts.join("; ")))
}

fn c2_brownian_sanity() -> Result<Outcome> {
    let n = 128;
    let (ad, worst) = brownian_increment_checks(n, 0.1, 100, SEED)?;
    let band = 4.0 / (n as f64).sqrt();
    outcome(
        ad <= ANDERSON_DARLING_CRITICAL_1PCT && worst <= band,
        format!("pooled AD={ad:.3} (crit {ANDERSON_DARLING_CRITICAL_1PCT}), max |lag-1|={worst:.3} (band {band:.3}), 100 paths"),
    )
}

fn c3_decomposition_identity() -> Result<Outcome> {
    let model = fou();
    let params = SdeParams::new(0.5, hurst(0.7));
    let grid = make_grid(1024, 2.5, 1.0)?;
    let mut rng = SeedStream::new(SEED, 3).rng();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..20 {
        let path = simulate(&model, &params, &grid, SeedStream::new(SEED, rng.random::<u32>() as u64))?;
        let x: f64 = rng.random_range(-0.5..0.5);
        let h: f64 = rng.random_range(0.15..0.8);
        for mode in [EstimatorMode::Plain, EstimatorMode::WickOracle] {
            let cfg = EstimatorConfig::new(Kernel::Biweight, h, vec![x])?.with_mode(mode);
            let terms = decompose(&path, &model, &cfg, x)?;
            let b = match nw_estimate(&path, &cfg, Some(&model)) {
                Ok(c) => c.b_hat[0],
                Err(Error::EmptyCurve) => None,
                Err(e) => return Err(e),
            };
            if let Some(b) = b {
                let scale = terms.magnitude().abs().max(b.abs());
                worst = worst.max((terms.estimate() - b).abs() / scale);
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && checked == 40,
        format!("max relative gap {worst:.2e} over {checked}/40 defined (triple, mode) pairs"),
    )
}

fn c4_malliavin_derivative() -> Result<Outcome> {
    let sigma = 0.5;
    let params = SdeParams::new(sigma, hurst(0.7));
    let grid = make_grid(256, 2.5, 1.0)?;

    let theta = 1.0;
    let linear = DriftModel::linear(theta)?;
    let path = simulate(&linear, &params, &grid, SeedStream::new(SEED, 4))?;
    let fine = path.fine()?;
    let profile = MalliavinProfile::new(&path, &linear)?;
    let mut lin_err: f64 = 0.0;
    for s in fine.offset..profile.len() {
        for t in s..profile.len() {
            let exact = sigma * (-theta * (t - s) as f64 * fine.delta).exp();
            lin_err = lin_err.max((profile.derivative(s, t) - exact).abs());
        }
    }

    let cubic = DriftModel::cubic();
    let m = cubic.dissipativity.unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut pairs = 0u64;
    for r in 0..10 {
        let path = simulate(&cubic, &params, &grid, SeedStream::new(SEED, 40 + r))?;
        let fine = path.fine()?;
        let profile = MalliavinProfile::new(&path, &cubic)?;
        for s in fine.offset..profile.len() {
            for t in s..profile.len() {
                let bound = sigma * (-m * (t - s) as f64 * fine.delta).exp();
                worst_ratio = worst_ratio.max(profile.derivative(s, t).abs() / bound);
                pairs += 1;
            }
        }
    }
    outcome(
        lin_err <= 1e-10 && worst_ratio <= 1.0 + 1e-6,
        format!("linear max |D - σe^(-θ(t-s))| = {lin_err:.2e}; cubic max |D|/bound = {worst_ratio:.6} over {pairs} fine pairs"),
    )
}

fn c5_increment_bound() -> Result<Outcome> {
    let model = fou();
    let sigma = 0.5;
    let h = 0.7;
    let a = h - 0.05;
    let params = SdeParams::new(sigma, hurst(h));
    let grid = make_grid(4096, 2.5, 1.0)?;
    let l = model.lipschitz.unwrap();
    let an = grid.spacing;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for r in 0..20 {
        let path = simulate(&model, &params, &grid, SeedStream::new(SEED, 50 + r))?;
        let fine = path.fine()?;
        let eta = 1.5 * holder_coefficient_of(&fine.fbm.values, fine.delta, a)?;
        for k in 0..grid.n {
            let lo = fine.obs_index(k);
            let xk = fine.values[lo];
            let sup = (lo..lo + fine.refine).map(|j| (fine.values[j] - xk).abs()).fold(0.0, f64::max);
            let bound = (sigma * eta * an.powf(a) + model.b(xk) * an).abs() * (l * an).exp() + 1e-12;
            worst = worst.max(sup / bound);
            if sup > bound {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations over 20x4096 intervals, max sup/bound = {worst:.3}"),
    )
}

fn c6_bias() -> Result<Outcome> {
    let model = fou();
    let kernel = Kernel::Biweight;
    let params = SdeParams::new(0.5, hurst(0.7));
    let grid = make_grid(4096, 2.5, 1.0)?;
    let xs = [-0.3, 0.0, 0.3];
    let hs = [0.4, 0.2, 0.1];
    let paths = (0..20)
        .map(|r| simulate(&model, &params, &grid, SeedStream::new(SEED, 60 + r)))
        .collect::<Result<Vec<_>>>()?;
    let mut bound_violations = 0;
    let mut worst_bound: f64 = 0.0;
    let mut oracle_ok = true;
    let mut worst_oracle = String::new();
    let mut worst_z: f64 = 0.0;
    let decs = paths
        .iter()
        .map(|p| Decomposer::new(p, &model, EstimatorMode::Plain))
        .collect::<Result<Vec<_>>>()?;
    let dense: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
    for &h in &hs {
        for (dec, path) in decs.iter().zip(&paths) {
            for &x in &dense {
                let t = dec.terms(kernel, h, x);
                if t.s > 1e-6 * path.grid.horizon() {
                    let gap = (t.ii / t.s - model.b(x)).abs();
                    let bound = model.local_sup_b_prime(x, h) * h;
                    worst_bound = worst_bound.max(gap / bound);
                    if gap > bound * (1.0 + 1e-12) {
                        bound_violations += 1;
                    }
                }
            }
        }
        for &x in &xs {
            let oracle = smoothing_oracle(&model, kernel, h, x);
            let diffs: Vec<f64> = decs
                .iter()
                .map(|d| {
                    let t = d.terms(kernel, h, x);
                    t.ii / t.s - oracle
                })
                .filter(|d| d.is_finite())
                .collect();
            let (m, se) = (mean(&diffs), std_err(&diffs));
            let allowed = 1e-3 + 4.0 * se;
            let z = m.abs() / allowed;
            if z > worst_z {
                worst_z = z;
                worst_oracle = format!("h={h} x={x}: |mean|={:.4} allowed {allowed:.4}", m.abs());
            }
            oracle_ok &= m.abs() <= allowed;
        }
    }
    outcome(
        bound_violations == 0 && oracle_ok,
        format!(
            "bias bound: {bound_violations} violations, max gap/bound {worst_bound:.3}; vs smoothing oracle (1e-3 + 4 SE over 20 paths) worst {worst_oracle}"
        ),
    )
}

struct Sweep {
    report: ConvergenceReport,
    secs: f64,
}

fn sweep() -> Result<&'static Sweep> {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    if let Some(s) = SWEEP.get() {
        return Ok(s);
    }
    let mut plan = ExperimentPlan::load(&plans_dir().join("consistency.toml"))?;
    plan.seed = Some(SEED);
    let start = Instant::now();
    let report = run_experiment(&plan, Tasks::ALL)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(SWEEP.get_or_init(|| Sweep { report, secs }))
}

fn c7_term_i_order() -> Result<Outcome> {
    let d = sweep()?.report.decay.as_ref().expect("decay table");
    let med: Vec<String> = d.rows.iter().map(|r| format!("{:.3e}", r.term_i_median_abs)).collect();
    outcome(
        d.slope_term_i_median >= 0.5,
        format!("slope of ln median|I/S| on ln α_n = {:.3} (need >= 0.5); medians {}", d.slope_term_i_median, med.join(", ")),
    )
}

fn c8_term_iii_order() -> Result<Outcome> {
    let d = sweep()?.report.decay.as_ref().expect("decay table");
    let h = sweep()?.report.metadata.plan.hurst;
    let limit = 2.0 * h - 2.0 + 0.2;
    let centred = d.rows.iter().all(|r| r.term_iii_mean.abs() <= 4.0 * r.term_iii_std_err);
    let z: Vec<String> = d
        .rows
        .iter()
        .map(|r| format!("{:.2}", r.term_iii_mean / r.term_iii_std_err))
        .collect();
    outcome(
        d.slope_term_iii <= limit && centred,
        format!(
            "slope of ln E[III^2] on ln t_n = {:.3} (need <= {limit:.2}); mean/SE by n: {}",
            d.slope_term_iii,
            z.join(", ")
        ),
    )
}

/// Terminal pilot median plus four standard errors of a median.
fn pilot_threshold() -> Result<(f64, f64)> {
    let text = std::fs::read_to_string(plans_dir().join("pilot/report.json"))?;
    let pilot: ConvergenceReport = serde_json::from_str(&text)?;
    let last = pilot.rows.last().ok_or(Error::EmptyReport)?;
    let se = 1.2533 * (last.sup_error_iqr / 1.349) / (last.seeds as f64).sqrt();
    Ok((last.sup_error_median, last.sup_error_median + 4.0 * se))
}

fn c9_consistency() -> Result<Outcome> {
    let s = sweep()?;
    let medians: Vec<f64> = s.report.rows.iter().map(|r| r.sup_error_median).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let (pilot, threshold) = pilot_threshold()?;
    let last = *medians.last().unwrap();
    let text: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
    outcome(
        decreasing && last <= threshold && s.secs <= 900.0,
        format!(
            "median sup-error by n: {} (strictly decreasing: {decreasing}); terminal {last:.4} vs threshold {threshold:.4} (pilot median {pilot:.4}); sweep {:.0}s of 900s",
            text.join(", "),
            s.secs
        ),
    )
}

fn c10_ergodicity() -> Result<Outcome> {
    let (theta, sigma, h, gamma) = (1.0, 0.5, 0.7, 3.5);
    let model = DriftModel::linear(theta)?;
    let params = SdeParams::new(sigma, hurst(h));
    let n = 1usize << 16;
    // c_α chosen so that t_n = 4000 at this n
    let t_n = 4000.0;
    let c_alpha = t_n / (n as f64).powf(1.0 / gamma);
    let grid: ObservationGrid<f64> = make_grid(n, gamma, c_alpha)?;
    let path = simulate(&model, &params, &grid, SeedStream::new(SEED, 10))?;
    let reference = fou_stationary_variance(theta, sigma, h);
    let time = time_average(&path, TestFunction::Square)?;
    let step = step_average(&path, TestFunction::Square);
    let covered = theorem_covered(model.poly_degree, TestFunction::Square, gamma, h);
    let rel = |v: f64| (v - reference).abs() / reference;
    outcome(
        rel(time) <= 0.05 && rel(step) <= 0.05 && (step - time).abs() <= 0.02 && grid.horizon() >= 1000.0,
        format!(
            "t_n={:.0}, γ={gamma} (theorem-covered: {covered}); time {time:.5} ({:.1}%), step {step:.5} ({:.1}%), reference {reference:.5}, |step-time|={:.2e}",
            grid.horizon(),
            100.0 * rel(time),
            100.0 * rel(step),
            (step - time).abs()
        ),
    )
}

fn c11_reproducibility() -> Result<Outcome> {
    let plan = ExperimentPlan {
        n_list: vec![256, 512, 1024],
        seeds: 6,
        seed: Some(SEED),
        mode: EstimatorMode::WickOracle,
        ..ExperimentPlan::default()
    };
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let first = run_experiment(&plan, Tasks::ALL)?;
    // a different pool size must not change a byte
    let second = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .map_err(|e| Error::InvalidParams(e.to_string()))?
        .install(|| run_experiment(&plan, Tasks::ALL))?;
    let a = emit_report(&first, &[ReportFormat::Csv], dirs[0].path())?;
    let b = emit_report(&second, &[ReportFormat::Csv], dirs[1].path())?;
    let mut identical = a.len() == b.len() && !a.is_empty();
    for (x, y) in a.iter().zip(&b) {
        identical &= x.file_name() == y.file_name() && std::fs::read(x)? == std::fs::read(y)?;
    }
    outcome(identical, format!("{} CSV files compared byte for byte across two runs", a.len()))
}

fn main() {
    let strict = std::env::var("FBMDRIFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 11] = [
        ("fbm covariance exactness", c1_fbm_exactness),
        ("H=1/2 increment sanity", c2_brownian_sanity),
        ("decomposition identity", c3_decomposition_identity),
        ("Malliavin derivative", c4_malliavin_derivative),
        ("increment bound", c5_increment_bound),
        ("smoothing bias", c6_bias),
        ("term I order", c7_term_i_order),
        ("term III order", c8_term_iii_order),
        ("consistency", c9_consistency),
        ("ergodic averages", c10_ergodicity),
        ("reproducibility", c11_reproducibility),
    ];
    // `cargo test --test acceptance -- C3 C9` runs a subset
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| o.eq_ignore_ascii_case(&format!("C{}", i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} C{} {name} [{:.1}s]: {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
