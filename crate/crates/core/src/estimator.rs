//! Nadaraya-Watson drift estimation from a discretely observed path.
//!
//! ```text
//! b̂(x) = Σ_k K_h(X_{t_k} − x)·(X_{t_{k+1}} − X_{t_k}) / (α_n Σ_k K_h(X_{t_k} − x))
//! ```
//!
//! In `wick-oracle` mode each numerator summand has the Malliavin correction
//! of its noise part removed (see [`crate::malliavin`]). With the drift model
//! known, the numerator splits as `n·(I + II + III)` where
//!
//! ```text
//! I   = (1/(nα_n)) Σ_k K_h(X_{t_k} − x) ∫_{t_k}^{t_{k+1}} (b(X_s) − b(X_{t_k})) ds
//! II  = (1/n)      Σ_k K_h(X_{t_k} − x) b(X_{t_k})
//! III = (1/(nα_n)) Σ_k K_h(X_{t_k} − x) ⋄ σ(B_{t_{k+1}} − B_{t_k})
//! S   = (1/n)      Σ_k K_h(X_{t_k} − x)
//! ```

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::malliavin::WickCorrector;
use crate::models::{DriftModel, Kernel};
use crate::quadrature::adaptive_simpson;
use crate::scalar::{count, lit, to_f64, Real};
use crate::sde::SamplePath;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    #[default]
    Plain,
    WickOracle,
}

impl EstimatorMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::Plain => "plain",
            EstimatorMode::WickOracle => "wick-oracle",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(EstimatorMode::Plain),
            "wick-oracle" | "wick_oracle" => Ok(EstimatorMode::WickOracle),
            other => Err(Error::InvalidParams(format!("unknown estimator mode `{other}`"))),
        }
    }
}

pub const DEFAULT_MIN_MASS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    pub kernel: Kernel,
    pub h: T,
    pub mode: EstimatorMode,
    pub x_grid: Vec<T>,
    pub min_mass: T,
}

impl<T: Real> EstimatorConfig<T> {
    pub fn new(kernel: Kernel, h: T, x_grid: Vec<T>) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParams(format!("bandwidth must be positive, got {h}")));
        }
        if x_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("evaluation points must be finite".into()));
        }
        Ok(Self {
            kernel,
            h,
            mode: EstimatorMode::Plain,
            x_grid,
            min_mass: lit(DEFAULT_MIN_MASS),
        })
    }

    pub fn with_mode(mut self, mode: EstimatorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_min_mass(mut self, min_mass: T) -> Self {
        self.min_mass = min_mass;
        self
    }
}

/// `n^{−1/5}`.
pub fn default_bandwidth<T: Real>(n: usize) -> T {
    count::<T>(n).powf(lit(-0.2))
}

/// `points` equispaced values from `a` to `b` inclusive.
pub fn linspace<T: Real>(a: T, b: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![(a + b) / lit(2.0)],
        _ => {
            let step = (b - a) / count::<T>(points - 1);
            (0..points).map(|i| a + count::<T>(i) * step).collect()
        }
    }
}

/// `points` equispaced values spanning the 5%–95% quantiles of the
/// observations.
pub fn default_x_grid<T: Real>(path: &SamplePath<T>, points: usize) -> Vec<T> {
    let obs: Vec<f64> = path.obs.iter().map(|&v| to_f64(v)).collect();
    let lo = crate::stats::quantile(&obs, 0.05);
    let hi = crate::stats::quantile(&obs, 0.95);
    linspace(lit(lo), lit(hi), points)
}

/// Per-point terms of the decomposition; `b̂ = (i + ii + iii) / s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Terms<T> {
    pub i: T,
    pub ii: T,
    pub iii: T,
    pub s: T,
}

impl<T: Real> Terms<T> {
    pub fn estimate(&self) -> T {
        (self.i + self.ii + self.iii) / self.s
    }

    /// `(|I| + |II| + |III|) / S`, the scale against which the identity
    /// `b̂ = (I + II + III)/S` is judged.
    pub fn magnitude(&self) -> T {
        (self.i.abs() + self.ii.abs() + self.iii.abs()) / self.s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCurve<T> {
    pub x: Vec<T>,
    /// `None` where the kernel mass is below the configured minimum.
    pub b_hat: Vec<Option<T>>,
    pub mass: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Terms<T>>>,
}

impl<T: Real> EstimateCurve<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn defined(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.x.iter().zip(&self.b_hat).filter_map(|(&x, b)| b.map(|b| (x, b)))
    }

    /// `max |b̂(x) − f(x)|` over defined points.
    pub fn sup_error(&self, f: impl Fn(T) -> T) -> T {
        self.defined().map(|(x, b)| (b - f(x)).abs()).fold(T::zero(), T::max)
    }

    /// Root mean square of `b̂(x) − f(x)` over defined points.
    pub fn l2_error(&self, f: impl Fn(T) -> T) -> T {
        let (sum, m) = self
            .defined()
            .fold((T::zero(), 0usize), |(s, m), (x, b)| (s + (b - f(x)).powi(2), m + 1));
        if m == 0 {
            return T::nan();
        }
        (sum / count::<T>(m)).sqrt()
    }
}

/// `(1/n) Σ_{k<n} K_h(X_{t_k} − x)`.
pub fn denominator_mass<T: Real>(path: &SamplePath<T>, kernel: Kernel, h: T, x: T) -> T {
    let n = path.n();
    let sum: T = path.obs[..n].iter().map(|&xk| kernel.scaled(h, xk - x)).sum();
    sum / count::<T>(n)
}

/// Per-path quantities reused across evaluation points: interval drift
/// integrals on the fine grid, noise increments and (in `wick-oracle` mode)
/// the Wick correction factors.
pub struct Decomposer<'a, T> {
    path: &'a SamplePath<T>,
    drift_at_obs: Vec<T>,
    /// `δ Σ_j (b(X_j) − b(X_{t_k}))` over the fine nodes of interval `k`.
    drift_deviation: Vec<T>,
    noise: Vec<T>,
    wick: Option<WickCorrector<T>>,
}

impl<'a, T: Real> Decomposer<'a, T> {
    pub fn new(path: &'a SamplePath<T>, model: &DriftModel<T>, mode: EstimatorMode) -> Result<Self> {
        let fine = path.fine()?;
        let n = path.n();
        let delta = fine.delta;
        let drift_at_obs: Vec<T> = path.obs[..n].iter().map(|&x| model.b(x)).collect();
        let mut drift_deviation = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (fine.obs_index(k), fine.obs_index(k + 1));
            let sum: T = fine.values[a..b].iter().map(|&x| model.b(x) - drift_at_obs[k]).sum();
            drift_deviation.push(sum * delta);
            noise.push(path.sigma * (fine.fbm.values[b] - fine.fbm.values[a]));
        }
        let wick = match mode {
            EstimatorMode::Plain => None,
            EstimatorMode::WickOracle => Some(WickCorrector::new(path, model)?),
        };
        Ok(Self {
            path,
            drift_at_obs,
            drift_deviation,
            noise,
            wick,
        })
    }

    pub fn mode(&self) -> EstimatorMode {
        if self.wick.is_some() {
            EstimatorMode::WickOracle
        } else {
            EstimatorMode::Plain
        }
    }

    pub fn corrector(&self) -> Option<&WickCorrector<T>> {
        self.wick.as_ref()
    }

    pub fn terms(&self, kernel: Kernel, h: T, x: T) -> Terms<T> {
        let path = self.path;
        let n = path.n();
        let alpha = path.grid.spacing;
        let (mut i, mut ii, mut iii, mut s) = (T::zero(), T::zero(), T::zero(), T::zero());
        for k in 0..n {
            let u = path.obs[k] - x;
            let w = kernel.scaled(h, u);
            let corr = match &self.wick {
                Some(c) => kernel.scaled_prime(h, u) * c.factor(k),
                None => T::zero(),
            };
            if w == T::zero() && corr == T::zero() {
                continue;
            }
            i += w * self.drift_deviation[k];
            ii += w * self.drift_at_obs[k];
            iii += w * self.noise[k] - corr;
            s += w;
        }
        let nf = count::<T>(n);
        Terms {
            i: i / (nf * alpha),
            ii: ii / nf,
            iii: iii / (nf * alpha),
            s: s / nf,
        }
    }
}

/// Terms `(I, II, III, S)` at a single point; requires the fine grid.
pub fn decompose<T: Real>(
    path: &SamplePath<T>,
    model: &DriftModel<T>,
    cfg: &EstimatorConfig<T>,
    x: T,
) -> Result<Terms<T>> {
    Ok(Decomposer::new(path, model, cfg.mode)?.terms(cfg.kernel, cfg.h, x))
}

/// Evaluate the estimator on `cfg.x_grid`.
///
/// `wick-oracle` mode needs the drift model (for the Malliavin derivative)
/// and the fine grid; plain mode uses only the observations.
pub fn nw_estimate<T: Real>(
    path: &SamplePath<T>,
    cfg: &EstimatorConfig<T>,
    model: Option<&DriftModel<T>>,
) -> Result<EstimateCurve<T>> {
    let wick = match cfg.mode {
        EstimatorMode::Plain => None,
        EstimatorMode::WickOracle => {
            let model = model.ok_or_else(|| {
                Error::InvalidParams("wick-oracle mode needs the drift model".into())
            })?;
            Some(WickCorrector::new(path, model)?)
        }
    };
    nw_estimate_with(path, cfg, wick.as_ref())
}

/// As [`nw_estimate`] with precomputed correction factors (`None` = plain).
pub fn nw_estimate_with<T: Real>(
    path: &SamplePath<T>,
    cfg: &EstimatorConfig<T>,
    wick: Option<&WickCorrector<T>>,
) -> Result<EstimateCurve<T>> {
    let n = path.n();
    let alpha = path.grid.spacing;
    let (kernel, h) = (cfg.kernel, cfg.h);
    let points: Vec<(Option<T>, T)> = cfg
        .x_grid
        .par_iter()
        .map(|&x| {
            let mut num = T::zero();
            let mut den = T::zero();
            for k in 0..n {
                let u = path.obs[k] - x;
                let w = kernel.scaled(h, u);
                num += w * path.increment(k);
                if let Some(c) = wick {
                    num -= kernel.scaled_prime(h, u) * c.factor(k);
                }
                den += w;
            }
            let mass = den / count::<T>(n);
            let b = (mass >= cfg.min_mass && den > T::zero()).then(|| num / (alpha * den));
            (b, mass)
        })
        .collect();
    finish_curve(cfg, points, None)
}

/// Curve plus per-point decomposition terms (oracle: needs model and fine grid).
pub fn nw_estimate_with_terms<T: Real>(
    decomposer: &Decomposer<'_, T>,
    cfg: &EstimatorConfig<T>,
) -> Result<EstimateCurve<T>> {
    let wick = decomposer.corrector();
    let curve = nw_estimate_with(decomposer.path, cfg, wick)?;
    let terms: Vec<Terms<T>> = cfg
        .x_grid
        .par_iter()
        .map(|&x| decomposer.terms(cfg.kernel, cfg.h, x))
        .collect();
    Ok(EstimateCurve {
        terms: Some(terms),
        ..curve
    })
}

fn finish_curve<T: Real>(
    cfg: &EstimatorConfig<T>,
    points: Vec<(Option<T>, T)>,
    terms: Option<Vec<Terms<T>>>,
) -> Result<EstimateCurve<T>> {
    let (b_hat, mass): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    if b_hat.iter().all(Option::is_none) {
        return Err(Error::EmptyCurve);
    }
    Ok(EstimateCurve {
        x: cfg.x_grid.clone(),
        b_hat,
        mass,
        terms,
    })
}

/// Time-weighted comparison estimator with weights `(t_n − t_k)^{1−2H}` in
/// numerator and denominator. The reported mass is the weighted average of
/// `K_h(X_{t_k} − x)`.
pub fn nw_estimate_weighted_baseline<T: Real>(
    path: &SamplePath<T>,
    cfg: &EstimatorConfig<T>,
) -> Result<EstimateCurve<T>> {
    let n = path.n();
    if n < 2 {
        return Err(Error::InvalidParams("baseline estimator needs n >= 2".into()));
    }
    let alpha = path.grid.spacing;
    let e = T::one() - lit::<T>(2.0) * path.hurst.value();
    let t_n = path.grid.horizon();
    let weights: Vec<T> = (0..n).map(|k| (t_n - path.grid.time(k)).powf(e)).collect();
    let total: T = weights.iter().copied().sum();
    let (kernel, h) = (cfg.kernel, cfg.h);
    let points: Vec<(Option<T>, T)> = cfg
        .x_grid
        .par_iter()
        .map(|&x| {
            let mut num = T::zero();
            let mut den = T::zero();
            for k in 0..n {
                let w = weights[k] * kernel.scaled(h, path.obs[k] - x);
                num += w * path.increment(k);
                den += w;
            }
            let mass = den / total;
            let b = (mass >= cfg.min_mass && den > T::zero()).then(|| num / (alpha * den));
            (b, mass)
        })
        .collect();
    finish_curve(cfg, points, None)
}

/// `∫ K_h(y − x) b(y) dy` by adaptive Simpson over `[x − h, x + h]`.
pub fn smoothing_oracle<T: Real>(model: &DriftModel<T>, kernel: Kernel, h: T, x: T) -> T {
    adaptive_simpson(|y| kernel.scaled(h, y - x) * model.b(y), x - h, x + h, lit(1e-9))
}
