//! Malliavin derivative of the simulated state and the Wick-product
//! correction that turns pathwise Riemann sums into Skorokhod-type sums.
//!
//! For `dX = b(X)dt + σ dB^H` the derivative is `D_s X_t = σ exp(∫_s^t b′(X_r) dr)`.
//! For an integrand `F = K_h(X_{t_k} − x)` the Wick product with the noise
//! increment `σ(B_{t_{k+1}} − B_{t_k})` is
//!
//! ```text
//! F ⋄ σΔB_k = F·σΔB_k − ⟨DF, σ·1_[t_k, t_{k+1}]⟩_H
//!           = F·σΔB_k − K_h′(X_{t_k} − x) · c_k,
//! c_k       = σ ∫ D_s X_{t_k} · H[(t_{k+1} − s)^{2H−1} − (t_k − s)^{2H−1}] ds,
//! ```
//!
//! where the `t`-integral of the `H` inner product is done in closed form and
//! the `s`-integral is a left-endpoint Riemann sum over the fine grid, burn-in
//! included. `c_k` does not depend on `x`, so [`WickCorrector`] computes it once
//! per path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbm::HurstIndex;
use crate::models::{DriftModel, Kernel};
use crate::scalar::{lit, Real};
use crate::sde::{FineGrid, SamplePath};

/// `H·[(t_{k+1} − s)^{2H−1} − (t_k − s)^{2H−1}] = H(2H−1)∫_{t_k}^{t_{k+1}} (t − s)^{2H−2} dt`.
pub fn hilbert_weight<T: Real>(s: T, t_k: T, t_k1: T, hurst: HurstIndex<T>) -> T {
    let h = hurst.value();
    let e = lit::<T>(2.0) * h - T::one();
    h * ((t_k1 - s).max(T::zero()).powf(e) - (t_k - s).max(T::zero()).powf(e))
}

/// `D_s X_t` on fine-grid index pairs, from a prefix trapezoid integral of
/// `b′(X)`.
pub struct MalliavinProfile<'a, T> {
    fine: &'a FineGrid<T>,
    integral: Vec<T>,
    sigma: T,
}

impl<'a, T: Real> MalliavinProfile<'a, T> {
    pub fn new(path: &'a SamplePath<T>, model: &DriftModel<T>) -> Result<Self> {
        let fine = path.fine()?;
        Ok(Self {
            fine,
            integral: prefix_integral(fine, model),
            sigma: path.sigma,
        })
    }

    /// `D_{s} X_{t}` for fine indices `s_idx ≤ t_idx`.
    #[inline]
    pub fn derivative(&self, s_idx: usize, t_idx: usize) -> T {
        debug_assert!(s_idx <= t_idx);
        self.sigma * (self.integral[t_idx] - self.integral[s_idx]).exp()
    }

    pub fn len(&self) -> usize {
        self.fine.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fine.values.is_empty()
    }
}

fn prefix_integral<T: Real>(fine: &FineGrid<T>, model: &DriftModel<T>) -> Vec<T> {
    let half = fine.delta / lit(2.0);
    let mut out = Vec::with_capacity(fine.values.len());
    let mut acc = T::zero();
    out.push(acc);
    let mut prev = model.b_prime(fine.values[0]);
    for &x in &fine.values[1..] {
        let cur = model.b_prime(x);
        acc += (prev + cur) * half;
        out.push(acc);
        prev = cur;
    }
    out
}

/// `D_s X_t = σ exp(∫_s^t b′(X_r) dr)` between fine indices, trapezoid rule.
pub fn malliavin_derivative<T: Real>(
    path: &SamplePath<T>,
    model: &DriftModel<T>,
    s_idx: usize,
    t_idx: usize,
) -> Result<T> {
    let fine = path.fine()?;
    if s_idx > t_idx || t_idx >= fine.values.len() {
        return Err(Error::InvalidParams(format!(
            "need s_idx <= t_idx < {}, got ({s_idx}, {t_idx})",
            fine.values.len()
        )));
    }
    let bp: Vec<T> = fine.values[s_idx..=t_idx].iter().map(|&x| model.b_prime(x)).collect();
    let integral = crate::quadrature::trapezoid(&bp, fine.delta);
    Ok(path.sigma * integral.exp())
}

/// Segment length for the blocked correction sums.
const SEGMENT: usize = 256;
/// Blocks further than `e^{-46}` in derivative magnitude are skipped.
const TRUNCATION_LOG: f64 = -46.0;

/// Per-interval factors `c_k` of the Wick correction for one path.
#[derive(Clone, Debug)]
pub struct WickCorrector<T> {
    factors: Vec<T>,
}

impl<T: Real> WickCorrector<T> {
    /// Compute `c_k` for every observation interval.
    ///
    /// Uses a blocked dot product: inside each fine-grid segment the
    /// derivative is expressed relative to the segment end, so no exponential
    /// is evaluated in the inner loop. When `b′ ≤ 0` along the whole path the
    /// derivative is monotone in `s`, and segments whose contribution falls
    /// below `e^{-46}` are dropped.
    pub fn new(path: &SamplePath<T>, model: &DriftModel<T>) -> Result<Self> {
        let fine = path.fine()?;
        let hurst = path.hurst;
        let sigma = path.sigma;
        let len = fine.values.len();
        let g = prefix_integral(fine, model);
        let monotone = fine.values.iter().all(|&x| model.b_prime(x) <= T::zero());
        let h = hurst.value();
        let e = lit::<T>(2.0) * h - T::one();
        let alpha = path.grid.spacing;
        let delta = fine.delta;
        let phi: Vec<T> = (0..len)
            .map(|l| {
                let u = crate::scalar::count::<T>(l) * delta;
                h * ((u + alpha).powf(e) - u.powf(e))
            })
            .collect();
        let anchor = |p: usize| ((p + 1) * SEGMENT).min(len) - 1;
        let scaled: Vec<T> = (0..len).map(|j| (g[anchor(j / SEGMENT)] - g[j]).exp()).collect();
        let cutoff = lit::<T>(TRUNCATION_LOG);
        let weight = sigma * sigma * delta;

        let factors = (0..path.n())
            .into_par_iter()
            .map(|k| {
                let big_j = fine.obs_index(k);
                if big_j == 0 || sigma == T::zero() {
                    return T::zero();
                }
                let mut acc = T::zero();
                let mut p = (big_j - 1) / SEGMENT;
                loop {
                    let lo = p * SEGMENT;
                    let hi = ((p + 1) * SEGMENT).min(big_j);
                    let partial: T = scaled[lo..hi]
                        .iter()
                        .zip(phi[big_j - hi + 1..=big_j - lo].iter().rev())
                        .map(|(&a, &w)| a * w)
                        .sum();
                    acc += (g[big_j] - g[anchor(p)]).exp() * partial;
                    if p == 0 || (monotone && g[big_j] - g[anchor(p - 1)] < cutoff) {
                        break;
                    }
                    p -= 1;
                }
                weight * acc
            })
            .collect();
        Ok(Self { factors })
    }

    /// Reference evaluation of `c_k`: the plain Riemann sum over every fine
    /// node `s_j < t_k`, with weights from [`hilbert_weight`] on actual times.
    pub fn direct(path: &SamplePath<T>, model: &DriftModel<T>, k: usize) -> Result<T> {
        let profile = MalliavinProfile::new(path, model)?;
        let fine = profile.fine;
        let big_j = fine.obs_index(k);
        let (t_k, t_k1) = (path.grid.time(k), path.grid.time(k + 1));
        let sum: T = (0..big_j)
            .map(|j| profile.derivative(j, big_j) * hilbert_weight(fine.time(j), t_k, t_k1, path.hurst))
            .sum();
        Ok(path.sigma * sum * fine.delta)
    }

    #[inline]
    pub fn factor(&self, k: usize) -> T {
        self.factors[k]
    }

    pub fn factors(&self) -> &[T] {
        &self.factors
    }

    /// `⟨D K_h(X_{t_k} − x), σ·1_[t_k, t_{k+1}]⟩_H`.
    #[inline]
    pub fn correction(&self, k: usize, x_k: T, x: T, kernel: Kernel, h: T) -> T {
        kernel.scaled_prime(h, x_k - x) * self.factors[k]
    }
}

/// `K_h(X_{t_k} − x) ⋄ (X_{t_{k+1}} − X_{t_k})`: the plain product minus the
/// Malliavin correction of the noise part.
pub fn wick_increment<T: Real>(
    path: &SamplePath<T>,
    k: usize,
    x: T,
    kernel: Kernel,
    h: T,
    model: &DriftModel<T>,
) -> Result<T> {
    path.fine()?;
    let x_k = path.obs[k];
    let plain = kernel.scaled(h, x_k - x) * path.increment(k);
    let slope = kernel.scaled_prime(h, x_k - x);
    if slope == T::zero() {
        return Ok(plain);
    }
    Ok(plain - slope * WickCorrector::direct(path, model, k)?)
}
