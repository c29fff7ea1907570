//! Distributional checks of the fBm samplers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fbm::{fbm_covariance, FbmSampler, HurstIndex, SamplingMethod, CHOLESKY_MAX_N};
use crate::rng::SeedStream;
use crate::stats::{anderson_darling_normal, lag1_autocorrelation, ANDERSON_DARLING_CRITICAL_1PCT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestConfig {
    pub hurst: f64,
    pub n: usize,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Bound on entrywise covariance errors.
    pub tolerance: f64,
    /// Paths used by the increment checks at `H = 1/2`.
    pub increment_paths: usize,
}

impl Default for SelfTestConfig {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            n: 128,
            dt: 0.1,
            paths: 20_000,
            seed: 1,
            tolerance: 0.02,
            increment_paths: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub config: SelfTestConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SelfTestReport {
    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<40} {:>14} {:>12}  result\n", "check", "statistic", "threshold");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<40} {:>14.6e} {:>12.4e}  {}\n",
                c.name,
                c.statistic,
                c.threshold,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

const CHUNK: usize = 250;

/// `E[B_{t_i} B_{t_j}]` estimated from `paths` samples (known zero mean), upper
/// triangle `i ≤ j` over grid points `1..=n`, row-major.
pub fn empirical_covariance(sampler: &FbmSampler<f64>, paths: usize, seed: u64, stream0: u64) -> Vec<f64> {
    let n = sampler.steps();
    let len = n * (n + 1) / 2;
    let chunks: Vec<Vec<f64>> = (0..paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            for r in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                let v = sampler.sample_values(SeedStream::new(seed, stream0 + r as u64));
                let mut idx = 0;
                for i in 1..=n {
                    let vi = v[i];
                    for &vj in &v[i..=n] {
                        acc[idx] += vi * vj;
                        idx += 1;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for c in &chunks {
        for (t, a) in total.iter_mut().zip(c) {
            *t += a;
        }
    }
    total.iter().map(|t| t / paths as f64).collect()
}

/// Upper-triangle `R_H(t_i, t_j)` in the layout of [`empirical_covariance`].
pub fn theoretical_covariance(n: usize, dt: f64, hurst: HurstIndex<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 1..=n {
        for j in i..=n {
            out.push(fbm_covariance(i as f64 * dt, j as f64 * dt, hurst));
        }
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Anderson-Darling statistic of every increment of `paths` Brownian paths
/// (pooled, standardized by `√dt`) and the largest lag-1 autocorrelation
/// deviation relative to the `4/√n` band.
pub fn brownian_increment_checks(n: usize, dt: f64, paths: usize, seed: u64) -> Result<(f64, f64)> {
    let sampler = FbmSampler::new(n, dt, HurstIndex::new(0.5)?, SamplingMethod::Circulant)?;
    let mut pooled = Vec::with_capacity(n * paths);
    let mut worst: f64 = 0.0;
    for r in 0..paths {
        let v = sampler.sample_values(SeedStream::new(seed, r as u64));
        let inc: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]) / dt.sqrt()).collect();
        worst = worst.max(lag1_autocorrelation(&inc).abs());
        pooled.extend(inc);
    }
    Ok((anderson_darling_normal(&pooled, 0.0, 1.0), worst))
}

pub fn run_selftest(cfg: &SelfTestConfig) -> Result<SelfTestReport> {
    let hurst = HurstIndex::new(cfg.hurst)?;
    let mut checks = Vec::new();
    let circulant = FbmSampler::new(cfg.n, cfg.dt, hurst, SamplingMethod::Circulant)?;
    let theory = theoretical_covariance(cfg.n, cfg.dt, hurst);
    let emp_circ = empirical_covariance(&circulant, cfg.paths, cfg.seed, 0);
    let err = max_abs_diff(&emp_circ, &theory);
    checks.push(Check {
        name: "covariance vs R_H (circulant)".into(),
        statistic: err,
        threshold: cfg.tolerance,
        passed: err <= cfg.tolerance,
        detail: format!("{} paths, n = {}, dt = {}", cfg.paths, cfg.n, cfg.dt),
    });
    if cfg.n <= CHOLESKY_MAX_N {
        let cholesky = FbmSampler::new(cfg.n, cfg.dt, hurst, SamplingMethod::Cholesky)?;
        let emp_chol = empirical_covariance(&cholesky, cfg.paths, cfg.seed, 1 << 40);
        let err_chol = max_abs_diff(&emp_chol, &theory);
        checks.push(Check {
            name: "covariance vs R_H (cholesky)".into(),
            statistic: err_chol,
            threshold: cfg.tolerance,
            passed: err_chol <= cfg.tolerance,
            detail: String::new(),
        });
        let agree = max_abs_diff(&emp_chol, &emp_circ);
        checks.push(Check {
            name: "cholesky vs circulant covariance".into(),
            statistic: agree,
            threshold: cfg.tolerance,
            passed: agree <= cfg.tolerance,
            detail: String::new(),
        });
    }
    // one increment per path, at a rotating index, keeps the sample independent
    let inc: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|r| {
            let v = circulant.sample_values(SeedStream::new(cfg.seed, (1 << 41) + r as u64));
            let k = r % cfg.n;
            (v[k + 1] - v[k]) / cfg.dt.powf(cfg.hurst)
        })
        .collect();
    let ad = anderson_darling_normal(&inc, 0.0, 1.0);
    checks.push(Check {
        name: "increment normality (Anderson-Darling)".into(),
        statistic: ad,
        threshold: ANDERSON_DARLING_CRITICAL_1PCT,
        passed: ad <= ANDERSON_DARLING_CRITICAL_1PCT,
        detail: "1% level, N(0, dt^{2H}) fully specified".into(),
    });
    let t = cfg.n as f64 * cfg.dt;
    let expected = t.powf(2.0 * cfg.hurst);
    // last packed entry is the (T, T) diagonal
    let var = *emp_circ.last().expect("nonempty covariance");
    let se = expected * (2.0 / cfg.paths as f64).sqrt();
    checks.push(Check {
        name: "terminal variance within 4 SE".into(),
        statistic: (var - expected).abs() / se,
        threshold: 4.0,
        passed: (var - expected).abs() <= 4.0 * se,
        detail: format!("Var B_T = {var:.6}, T^(2H) = {expected:.6}"),
    });
    if (cfg.hurst - 0.5).abs() < 1e-12 {
        let (ad, worst) = brownian_increment_checks(cfg.n, cfg.dt, cfg.increment_paths, cfg.seed)?;
        checks.push(Check {
            name: "pooled increments normality (H = 1/2)".into(),
            statistic: ad,
            threshold: ANDERSON_DARLING_CRITICAL_1PCT,
            passed: ad <= ANDERSON_DARLING_CRITICAL_1PCT,
            detail: format!("{} paths", cfg.increment_paths),
        });
        let band = 4.0 / (cfg.n as f64).sqrt();
        checks.push(Check {
            name: "max |lag-1 autocorrelation| (H = 1/2)".into(),
            statistic: worst,
            threshold: band,
            passed: worst <= band,
            detail: format!("{} paths", cfg.increment_paths),
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfTestReport {
        config: cfg.clone(),
        checks,
        passed,
    })
}
