use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use crate::error::{Error, Result};
use crate::estimator::{
    default_x_grid, linspace, nw_estimate_with, smoothing_oracle, Decomposer, EstimatorConfig,
};
use crate::models::validate_assumptions;
use crate::rng::SeedStream;
use crate::sde::{make_grid, simulate};
use crate::stats::{iqr, log_log_slope, mean, median, std_err};

/// Which tables to compute from each simulated path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tasks {
    pub consistency: bool,
    pub decay: bool,
}

impl Tasks {
    pub const ALL: Tasks = Tasks {
        consistency: true,
        decay: true,
    };
}

/// Stream index of replication `r` at the `i`-th sample size.
pub fn seed_stream(base: u64, i: usize, r: u64) -> SeedStream {
    SeedStream::new(base, ((i as u64) << 32) | r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub n: usize,
    pub replication: u64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub h: f64,
    pub defined_points: usize,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error: f64,
    /// Errors against the kernel-smoothed drift instead of the drift itself.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error_smoothed: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error_smoothed: f64,
    /// `I/S` at the decay point with the decay bandwidth.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_i_ratio: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_iii: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub t_n: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub alpha_n: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub h: f64,
    pub seeds: usize,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error_median: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error_iqr: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error_median: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error_iqr: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error_smoothed_median: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub sup_error_smoothed_iqr: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error_smoothed_median: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub l2_error_smoothed_iqr: f64,
    pub assumptions: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub t_n: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub alpha_n: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub h: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub x: f64,
    pub seeds: usize,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_i_mean_abs: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_i_median_abs: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_iii_mean: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_iii_std_err: f64,
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub term_iii_second_moment: f64,
    pub assumptions: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// OLS slope of `ln mean|I/S|` on `ln α_n`.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub slope_term_i_mean: f64,
    /// OLS slope of `ln median|I/S|` on `ln α_n`.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub slope_term_i_median: f64,
    /// OLS slope of `ln E[III²]` on `ln t_n`.
    #[serde(deserialize_with = "crate::io::f64_or_nan")]
    pub slope_term_iii: f64,
}

/// First-replication curve at one sample size, for overlays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub n: usize,
    pub h: f64,
    pub x: Vec<f64>,
    pub b_hat: Vec<Option<f64>>,
    pub mass: Vec<f64>,
    pub truth: Vec<f64>,
    pub smoothed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub plan: ExperimentPlan,
    pub model: String,
    pub mode: String,
    pub assumptions: crate::models::AssumptionReport,
    pub assumption_flags: String,
    pub theorem_covered: bool,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ConvergenceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayTable>,
    pub seeds: Vec<SeedRecord>,
    pub curves: Vec<CurveSample>,
}

struct Outcome {
    record: SeedRecord,
    curve: Option<CurveSample>,
}

/// Sup and root-mean-square differences over defined points.
fn errors(b_hat: &[Option<f64>], reference: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = b_hat
        .iter()
        .zip(reference)
        .filter_map(|(b, r)| b.map(|b| (b - r).abs()))
        .collect();
    let sup = diffs.iter().copied().fold(0.0, f64::max);
    let l2 = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    (sup, l2)
}

fn run_one(plan: &ExperimentPlan, i: usize, n: usize, r: u64, tasks: Tasks) -> Result<Outcome> {
    let model = plan.model()?;
    let kernel = plan.kernel()?;
    let grid = make_grid(n, plan.gamma, plan.c_alpha)?;
    let seed = seed_stream(plan.seed.expect("validated plan"), i, r);
    let path = simulate(&model, &plan.sde_params()?, &grid, seed)?;
    let decomposer = Decomposer::new(&path, &model, plan.mode)?;
    let h = plan.bandwidth_at(n);

    let mut record = SeedRecord {
        n,
        replication: r,
        h,
        defined_points: 0,
        sup_error: f64::NAN,
        l2_error: f64::NAN,
        sup_error_smoothed: f64::NAN,
        l2_error_smoothed: f64::NAN,
        term_i_ratio: f64::NAN,
        term_iii: f64::NAN,
        mass: f64::NAN,
    };
    let mut curve = None;
    if tasks.consistency {
        let x_grid = match (plan.x_grid.min, plan.x_grid.max) {
            (Some(a), Some(b)) => linspace(a, b, plan.x_grid.points),
            _ => default_x_grid(&path, plan.x_grid.points),
        };
        let cfg = EstimatorConfig::new(kernel, h, x_grid)?.with_mode(plan.mode);
        match nw_estimate_with(&path, &cfg, decomposer.corrector()) {
            Ok(c) => {
                let smoothed: Vec<f64> = c.x.iter().map(|&x| smoothing_oracle(&model, kernel, h, x)).collect();
                let truth: Vec<f64> = c.x.iter().map(|&x| model.b(x)).collect();
                let (sup, l2) = errors(&c.b_hat, &truth);
                let (sup_s, l2_s) = errors(&c.b_hat, &smoothed);
                record.defined_points = c.defined().count();
                record.sup_error = sup;
                record.l2_error = l2;
                record.sup_error_smoothed = sup_s;
                record.l2_error_smoothed = l2_s;
                if r == 0 {
                    curve = Some(CurveSample {
                        n,
                        h,
                        x: c.x.clone(),
                        b_hat: c.b_hat.clone(),
                        mass: c.mass.clone(),
                        truth,
                        smoothed,
                    });
                }
            }
            Err(Error::EmptyCurve) => {}
            Err(e) => return Err(e),
        }
    }
    if tasks.decay {
        let t = decomposer.terms(kernel, plan.decay_h, plan.decay_x);
        record.term_i_ratio = t.i / t.s;
        record.term_iii = t.iii;
        record.mass = t.s;
    }
    Ok(Outcome { record, curve })
}

/// Simulate every `(n, replication)` pair of the plan and aggregate.
pub fn run_experiment(plan: &ExperimentPlan, tasks: Tasks) -> Result<ConvergenceReport> {
    plan.validate()?;
    let model = plan.model()?;
    let kernel = plan.kernel()?;
    let hurst = plan.hurst_index()?;
    let jobs: Vec<(usize, usize, u64)> = plan
        .n_list
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..plan.seeds).map(move |r| (i, n, r)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(i, n, r)| run_one(plan, i, n, r, tasks))
        .collect::<Result<_>>()?;

    let assumptions = validate_assumptions(&model, Some(kernel), plan.gamma, hurst);
    let flags = assumptions.flags();
    let mut rows = Vec::new();
    let mut decay_rows = Vec::new();
    for &n in &plan.n_list {
        let group: Vec<&SeedRecord> = outcomes.iter().map(|o| &o.record).filter(|s| s.n == n).collect();
        let grid = make_grid(n, plan.gamma, plan.c_alpha)?;
        let pick = |f: fn(&SeedRecord) -> f64| -> Vec<f64> {
            group.iter().map(|s| f(s)).filter(|v| v.is_finite()).collect()
        };
        if tasks.consistency {
            let sup = pick(|s| s.sup_error);
            let l2 = pick(|s| s.l2_error);
            let sup_s = pick(|s| s.sup_error_smoothed);
            let l2_s = pick(|s| s.l2_error_smoothed);
            rows.push(ConvergenceRow {
                n,
                t_n: grid.horizon(),
                alpha_n: grid.spacing,
                h: plan.bandwidth_at(n),
                seeds: sup.len(),
                sup_error_median: median(&sup),
                sup_error_iqr: iqr(&sup),
                l2_error_median: median(&l2),
                l2_error_iqr: iqr(&l2),
                sup_error_smoothed_median: median(&sup_s),
                sup_error_smoothed_iqr: iqr(&sup_s),
                l2_error_smoothed_median: median(&l2_s),
                l2_error_smoothed_iqr: iqr(&l2_s),
                assumptions: flags.clone(),
            });
        }
        if tasks.decay {
            let ratio: Vec<f64> = pick(|s| s.term_i_ratio).iter().map(|v| v.abs()).collect();
            let iii = pick(|s| s.term_iii);
            let second: Vec<f64> = iii.iter().map(|v| v * v).collect();
            decay_rows.push(DecayRow {
                n,
                t_n: grid.horizon(),
                alpha_n: grid.spacing,
                h: plan.decay_h,
                x: plan.decay_x,
                seeds: iii.len(),
                term_i_mean_abs: mean(&ratio),
                term_i_median_abs: median(&ratio),
                term_iii_mean: mean(&iii),
                term_iii_std_err: std_err(&iii),
                term_iii_second_moment: mean(&second),
                assumptions: flags.clone(),
            });
        }
    }
    let decay = tasks.decay.then(|| {
        let alpha: Vec<f64> = decay_rows.iter().map(|r| r.alpha_n).collect();
        let t_n: Vec<f64> = decay_rows.iter().map(|r| r.t_n).collect();
        let col = |f: fn(&DecayRow) -> f64| -> Vec<f64> { decay_rows.iter().map(f).collect() };
        let slope = |x: &[f64], y: Vec<f64>| if x.len() >= 2 { log_log_slope(x, &y) } else { f64::NAN };
        DecayTable {
            slope_term_i_mean: slope(&alpha, col(|r| r.term_i_mean_abs)),
            slope_term_i_median: slope(&alpha, col(|r| r.term_i_median_abs)),
            slope_term_iii: slope(&t_n, col(|r| r.term_iii_second_moment)),
            rows: decay_rows,
        }
    });
    let mut curves: Vec<CurveSample> = outcomes.iter().filter_map(|o| o.curve.clone()).collect();
    curves.sort_by_key(|c| c.n);
    let theorem_covered = assumptions.covered();
    Ok(ConvergenceReport {
        metadata: ReportMetadata {
            plan: plan.clone(),
            model: model.name().to_string(),
            mode: plan.mode.to_string(),
            assumption_flags: flags,
            theorem_covered,
            assumptions,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows,
        decay,
        seeds: outcomes.into_iter().map(|o| o.record).collect(),
        curves,
    })
}

/// Error of the estimate against the drift and the smoothed drift, by sample size.
pub fn run_consistency(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    run_experiment(
        plan,
        Tasks {
            consistency: true,
            decay: false,
        },
    )
}

/// `|I/S|` and `III` at a fixed point and bandwidth, by sample size.
pub fn run_term_decay(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    run_experiment(
        plan,
        Tasks {
            consistency: false,
            decay: true,
        },
    )
}
