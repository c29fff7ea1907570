use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fbmdrift::ergodic::{builtin_test_function, ergodic_check};
use fbmdrift::estimator::{
    default_bandwidth, default_x_grid, linspace, nw_estimate, nw_estimate_with_terms, Decomposer, EstimateCurve,
    EstimatorConfig, EstimatorMode,
};
use fbmdrift::harness::{
    emit_report, run_consistency, run_selftest, run_term_decay, ExperimentPlan, ReportFormat, SelfTestConfig,
};
use fbmdrift::io::{create, read_path_csv, write_curve_csv, write_fine_csv, write_json, write_path_csv};
use fbmdrift::models::builtin_kernel;
use fbmdrift::sde::{make_grid, simulate, SamplePath};
use fbmdrift::{Error, HurstIndex};

#[derive(Parser, Debug)]
#[command(name = "fbmdrift", version, about = "Simulate fBm-driven ergodic SDEs and estimate their drift")]
struct Cli {
    /// Worker threads for the parallel harness [env: FBMDRIFT_WORKERS] [default: all cores]
    #[arg(long, global = true, env = "FBMDRIFT_WORKERS", hide_env = true)]
    workers: Option<usize>,

    /// Plan file (TOML, same keys as experiment plans); flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path and write path.csv and meta.json
    Simulate(SimulateArgs),
    /// Nadaraya-Watson drift estimate from a path file or a fresh simulation
    Estimate(EstimateArgs),
    /// Estimate plus the per-point terms I, II, III and S (simulated path)
    Decompose(EstimateArgs),
    /// Time and step averages of a test function against the stationary value
    ErgodicCheck(ErgodicArgs),
    /// Sup/L2 estimation error across sample sizes and seeds
    Convergence(ExperimentArgs),
    /// Decay of the approximation term I and the noise term III across sample sizes
    TermDecay(ExperimentArgs),
    /// Covariance and normality checks of the fBm samplers
    FbmSelftest(SelftestArgs),
}

#[derive(Args, Debug, Default)]
struct SdeArgs {
    /// Drift model: linear, cubic, linear_plus_sine or constant [default: linear]
    #[arg(long)]
    model: Option<String>,
    /// Mean-reversion rate of linear and linear_plus_sine [default: 1]
    #[arg(long)]
    theta: Option<f64>,
    /// Sine amplitude of linear_plus_sine [default: 0.5]
    #[arg(long)]
    amplitude: Option<f64>,
    /// Value of the constant drift [default: 0]
    #[arg(long)]
    value: Option<f64>,
    /// Noise scale σ [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Hurst index H [default: 0.7]
    #[arg(long)]
    hurst: Option<f64>,
    /// Initial state before burn-in [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    /// Observation-rate exponent γ, α_n = c_α n^{-1+1/γ} [default: 2.5]
    #[arg(long)]
    gamma: Option<f64>,
    /// Spacing constant c_α [default: 1]
    #[arg(long)]
    c_alpha: Option<f64>,
    /// Fine Euler steps per observation interval [default: 16]
    #[arg(long)]
    refine: Option<usize>,
    /// Discarded burn-in duration [default: 20]
    #[arg(long)]
    burn_in: Option<f64>,
    /// Smoothing kernel: biweight or triweight [default: biweight]
    #[arg(long)]
    kernel: Option<String>,
}

impl SdeArgs {
    fn apply(&self, plan: &mut ExperimentPlan) {
        if let Some(m) = &self.model {
            plan.drift.name = m.clone();
        }
        for (key, v) in [("theta", self.theta), ("amplitude", self.amplitude), ("value", self.value)] {
            if let Some(v) = v {
                plan.drift.params.insert(key.to_string(), v);
            }
        }
        set(&mut plan.sigma, self.sigma);
        set(&mut plan.hurst, self.hurst);
        set(&mut plan.x0, self.x0);
        set(&mut plan.gamma, self.gamma);
        set(&mut plan.c_alpha, self.c_alpha);
        set(&mut plan.refine, self.refine);
        set(&mut plan.burn_in, self.burn_in);
        if let Some(k) = &self.kernel {
            plan.kernel.name = k.clone();
        }
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args, Debug)]
struct PathArgs {
    #[command(flatten)]
    sde: SdeArgs,
    /// Number of observation intervals [default: first entry of the plan's n_list, 1024]
    #[arg(long)]
    n: Option<usize>,
    /// Base seed (required here or in the plan file)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write the fine grid (burn-in included) as fine.csv
    #[arg(long)]
    emit_fine: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Read `t,X` observations instead of simulating (plain mode only)
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Estimator: plain or wick-oracle [default: plain]
    #[arg(long)]
    mode: Option<EstimatorMode>,
    /// Bandwidth h [default: n^(-1/5)]
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Left end of the evaluation grid [default: 5% quantile of the observations]
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    /// Right end of the evaluation grid [default: 95% quantile of the observations]
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    /// Number of evaluation points [default: 41]
    #[arg(long)]
    x_points: Option<usize>,
    /// Output directory for curve.csv and curve.json [default: CSV on stdout]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErgodicArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Test function: one, identity, square, quartic or cos [default: square]
    #[arg(long, default_value = "square", hide_default_value = true)]
    phi: String,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    sde: SdeArgs,
    /// Base seed (required here or in the plan file)
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per sample size [default: 50]
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated, strictly increasing sample sizes [default: 1024,4096,16384]
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Estimator: plain or wick-oracle [default: plain]
    #[arg(long)]
    mode: Option<EstimatorMode>,
    /// Bandwidth constant c_h in h = c_h n^exponent [default: 1]
    #[arg(long)]
    c_h: Option<f64>,
    /// Bandwidth exponent [default: -0.2]
    #[arg(long, allow_negative_numbers = true)]
    bandwidth_exponent: Option<f64>,
    /// Fixed bandwidth for every n, overriding the rule
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Left end of the evaluation grid [default: 5% quantile of each path]
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    /// Right end of the evaluation grid [default: 95% quantile of each path]
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    /// Number of evaluation points [default: 41]
    #[arg(long)]
    x_points: Option<usize>,
    /// Evaluation point of the term-decay table [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    decay_x: Option<f64>,
    /// Fixed bandwidth of the term-decay table [default: 0.5]
    #[arg(long)]
    decay_h: Option<f64>,
    /// Output directory (required here or in the plan file)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated output formats: csv, json, svg [default: csv,json,svg]
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Hurst index
    #[arg(long, default_value_t = 0.75)]
    hurst: f64,
    /// Steps per path
    #[arg(long, default_value_t = 128)]
    n: usize,
    /// Step size
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Paths per covariance estimate
    #[arg(long, default_value_t = 20_000)]
    paths: usize,
    /// Base seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Bound on entrywise covariance errors
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
    /// Paths used by the increment checks at H = 0.5
    #[arg(long, default_value_t = 100)]
    increment_paths: usize,
    /// Also write the report as JSON to this file
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

/// Exit status of a completed self-test with failing checks.
const EXIT_CHECKS_FAILED: u8 = 3;

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { 2 } else { 1 },
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        kind: "UsageError".into(),
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report_failure(&usage(e.render().to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            report_failure(&f);
            ExitCode::from(f.code)
        }
    }
}

fn report_failure(f: &Failure) {
    let payload = json!({ "error": f.kind, "message": f.message });
    let _ = writeln!(std::io::stderr(), "{payload}");
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let plan = match &cli.config {
        Some(path) => ExperimentPlan::load(path)?,
        None => ExperimentPlan::default(),
    };
    match cli.command {
        Command::Simulate(a) => cmd_simulate(plan, a),
        Command::Estimate(a) => cmd_estimate(plan, a, false),
        Command::Decompose(a) => cmd_estimate(plan, a, true),
        Command::ErgodicCheck(a) => cmd_ergodic(plan, a),
        Command::Convergence(a) => cmd_experiment(plan, a, false),
        Command::TermDecay(a) => cmd_experiment(plan, a, true),
        Command::FbmSelftest(a) => cmd_selftest(a),
    }
}

/// Plan with path flags applied, plus the resolved `n` and seed.
fn resolve_path(mut plan: ExperimentPlan, a: &PathArgs) -> Result<(ExperimentPlan, usize, u64), Failure> {
    a.sde.apply(&mut plan);
    let n = a.n.or(plan.n_list.first().copied()).unwrap_or(1024);
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    plan.n_list = vec![n];
    set(&mut plan.seed, a.seed.map(Some));
    let seed = plan.seed.ok_or_else(|| usage("a seed is required (--seed or `seed` in the plan file)"))?;
    Ok((plan, n, seed))
}

fn simulate_plan(plan: &ExperimentPlan, n: usize, seed: u64) -> Result<SamplePath<f64>, Failure> {
    let model = plan.model()?;
    let grid = make_grid(n, plan.gamma, plan.c_alpha)?;
    Ok(simulate(&model, &plan.sde_params()?, &grid, seed)?)
}

fn cmd_simulate(plan: ExperimentPlan, a: SimulateArgs) -> Result<u8, Failure> {
    let (plan, n, seed) = resolve_path(plan, &a.path)?;
    let path = simulate_plan(&plan, n, seed)?;
    let dir = a.out.or(plan.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    write_path_csv(&path, create(&dir.join("path.csv"))?)?;
    if a.emit_fine {
        write_fine_csv(&path, create(&dir.join("fine.csv"))?)?;
    }
    let model = plan.model()?;
    let meta = json!({
        "model": model.name(),
        "drift_params": plan.drift.params,
        "sigma": plan.sigma,
        "hurst": plan.hurst,
        "x0": plan.x0,
        "n": n,
        "gamma": plan.gamma,
        "c_alpha": plan.c_alpha,
        "alpha_n": path.grid.spacing,
        "t_n": path.grid.horizon(),
        "seed": seed,
        "refine": plan.refine,
        "burn_in": plan.burn_in,
        "config": plan,
    });
    write_json(&meta, create(&dir.join("meta.json"))?)?;
    Ok(0)
}

fn cmd_estimate(plan: ExperimentPlan, a: EstimateArgs, with_terms: bool) -> Result<u8, Failure> {
    let mut plan = plan;
    a.path.sde.apply(&mut plan);
    let hurst = HurstIndex::new(plan.hurst)?.require_long_memory()?;
    set(&mut plan.mode, a.mode);
    set(&mut plan.x_grid.points, a.x_points);
    if a.x_min.is_some() {
        plan.x_grid.min = a.x_min;
    }
    if a.x_max.is_some() {
        plan.x_grid.max = a.x_max;
    }
    let mode = plan.mode;
    let (path, plan, seed) = match &a.input {
        Some(file) => {
            if with_terms || mode == EstimatorMode::WickOracle {
                return Err(usage(
                    "decompose and wick-oracle mode need the simulated fine grid; pass model flags and --seed instead of --input",
                ));
            }
            let mut plan = plan;
            let path = read_path_csv(fs::File::open(file)?, hurst)?;
            plan.n_list = vec![path.n()];
            (path, plan, None)
        }
        None => {
            let (plan, n, seed) = resolve_path(plan, &a.path)?;
            (simulate_plan(&plan, n, seed)?, plan, Some(seed))
        }
    };
    let kernel = builtin_kernel(&plan.kernel.name)?;
    let h = a.bandwidth.or(plan.bandwidth.fixed).unwrap_or_else(|| default_bandwidth(path.n()));
    let x_grid = match (plan.x_grid.min, plan.x_grid.max) {
        (Some(lo), Some(hi)) => linspace(lo, hi, plan.x_grid.points),
        (lo, hi) => {
            let auto = default_x_grid(&path, 2);
            linspace(lo.unwrap_or(auto[0]), hi.unwrap_or(auto[1]), plan.x_grid.points)
        }
    };
    let cfg = EstimatorConfig::new(kernel, h, x_grid)?.with_mode(mode);
    let curve: EstimateCurve<f64> = if with_terms {
        let model = plan.model()?;
        nw_estimate_with_terms(&Decomposer::new(&path, &model, mode)?, &cfg)?
    } else if mode == EstimatorMode::WickOracle {
        nw_estimate(&path, &cfg, Some(&plan.model()?))?
    } else {
        nw_estimate(&path, &cfg, None)?
    };
    match a.out {
        None => write_curve_csv(&curve, std::io::stdout().lock())?,
        Some(dir) => {
            let stem = if with_terms { "decompose" } else { "curve" };
            write_curve_csv(&curve, create(&dir.join(format!("{stem}.csv")))?)?;
            let meta = json!({
                "mode": mode,
                "kernel": kernel.name(),
                "h": h,
                "n": path.n(),
                "alpha_n": path.grid.spacing,
                "seed": seed,
                "input": a.input,
                "config": plan,
                "curve": curve,
            });
            write_json(&meta, create(&dir.join(format!("{stem}.json")))?)?;
        }
    }
    Ok(0)
}

fn cmd_ergodic(plan: ExperimentPlan, a: ErgodicArgs) -> Result<u8, Failure> {
    let (plan, n, seed) = resolve_path(plan, &a.path)?;
    let phi = builtin_test_function(&a.phi)?;
    let model = plan.model()?;
    let grid = make_grid(n, plan.gamma, plan.c_alpha)?;
    let report = ergodic_check(&model, &plan.sde_params()?, &grid, seed, phi)?;
    if let Some(file) = &a.out {
        write_json(&report, create(file)?)?;
    }
    write_json(&report, std::io::stdout().lock())?;
    Ok(0)
}

fn parse_formats(names: &[String]) -> Result<Vec<ReportFormat>, Failure> {
    names
        .iter()
        .map(|s| match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(usage(format!("unknown report format `{other}` (expected csv, json or svg)"))),
        })
        .collect()
}

fn cmd_experiment(mut plan: ExperimentPlan, a: ExperimentArgs, decay: bool) -> Result<u8, Failure> {
    a.sde.apply(&mut plan);
    set(&mut plan.seed, a.seed.map(Some));
    set(&mut plan.seeds, a.seeds);
    if let Some(list) = a.n_list {
        plan.n_list = list;
    }
    set(&mut plan.mode, a.mode);
    set(&mut plan.bandwidth.c_h, a.c_h);
    set(&mut plan.bandwidth.exponent, a.bandwidth_exponent);
    if a.bandwidth.is_some() {
        plan.bandwidth.fixed = a.bandwidth;
    }
    if a.x_min.is_some() {
        plan.x_grid.min = a.x_min;
    }
    if a.x_max.is_some() {
        plan.x_grid.max = a.x_max;
    }
    set(&mut plan.x_grid.points, a.x_points);
    set(&mut plan.decay_x, a.decay_x);
    set(&mut plan.decay_h, a.decay_h);
    if a.out.is_some() {
        plan.out = a.out;
    }
    let formats = match &a.format {
        Some(names) => parse_formats(names)?,
        None => ReportFormat::ALL.to_vec(),
    };
    plan.validate()?;
    let dir = plan
        .out
        .clone()
        .ok_or_else(|| usage("an output directory is required (--out or `out` in the plan file)"))?;
    let report = if decay { run_term_decay(&plan)? } else { run_consistency(&plan)? };
    for file in emit_report(&report, &formats, &dir)? {
        println!("{}", file.display());
    }
    Ok(0)
}

fn cmd_selftest(a: SelftestArgs) -> Result<u8, Failure> {
    let cfg = SelfTestConfig {
        hurst: a.hurst,
        n: a.n,
        dt: a.dt,
        paths: a.paths,
        seed: a.seed,
        tolerance: a.tolerance,
        increment_paths: a.increment_paths,
    };
    if cfg.n == 0 || cfg.paths == 0 || cfg.dt.is_nan() || cfg.dt <= 0.0 {
        return Err(usage("n, paths and dt must be positive"));
    }
    let report = run_selftest(&cfg)?;
    print!("{}", report.table());
    if let Some(file) = &a.json {
        write_json(&report, create(file)?)?;
    }
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { 0 } else { EXIT_CHECKS_FAILED })
}
