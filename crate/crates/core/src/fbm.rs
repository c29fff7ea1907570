//! Fractional Brownian motion on uniform grids.
//!
//! Two exact samplers are provided: circulant embedding of the fractional
//! Gaussian noise autocovariance (the default, `O(N log N)`), and a dense
//! Cholesky factor of the fBm covariance matrix for small grids, kept as an
//! independent cross-check. Both produce paths whose finite-dimensional law is
//! the fBm law restricted to `{0, Δ, …, nΔ}`.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::scalar::{count, lit, to_f64, Real};

/// Largest grid for which the dense Cholesky sampler may be requested.
pub const CHOLESKY_MAX_N: usize = 512;

/// Hurst index `H ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HurstIndex<T>(T);

impl<T: Real> HurstIndex<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value < T::one() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidHurst(to_f64(value)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// The estimation pipeline only covers the long-memory regime `H > 1/2`.
    pub fn require_long_memory(self) -> Result<Self> {
        if self.0 > lit(0.5) {
            Ok(self)
        } else {
            Err(Error::HurstTooSmall(
                "hurst must exceed 0.5 for estimation".to_string(),
            ))
        }
    }
}

/// A uniformly sampled trajectory that exposes its grid spacing.
pub trait UniformPath<T: Real> {
    fn spacing(&self) -> T;
    fn points(&self) -> &[T];
    fn hurst(&self) -> HurstIndex<T>;
}

/// Sampled fBm path on `{0, Δ, …, nΔ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub hurst: HurstIndex<T>,
    pub seed: SeedStream,
}

impl<T: Real> FbmPath<T> {
    /// Wrap externally produced values (e.g. loaded from disk) as a path.
    pub fn from_values(values: Vec<T>, dt: T, hurst: HurstIndex<T>, seed: SeedStream) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("path needs at least one value".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidParams("grid spacing must be positive".into()));
        }
        let times = (0..values.len()).map(|k| count::<T>(k) * dt).collect();
        Ok(Self {
            times,
            values,
            hurst,
            seed,
        })
    }

    pub fn dt(&self) -> T {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            T::zero()
        }
    }

    /// Number of increments `n` (the path has `n + 1` points).
    pub fn steps(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn increments(&self) -> Vec<T> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

impl<T: Real> UniformPath<T> for FbmPath<T> {
    fn spacing(&self) -> T {
        self.dt()
    }
    fn points(&self) -> &[T] {
        &self.values
    }
    fn hurst(&self) -> HurstIndex<T> {
        self.hurst
    }
}

/// `R_H(s, t) = (|t|^{2H} + |s|^{2H} − |t−s|^{2H}) / 2`.
pub fn fbm_covariance<T: Real>(s: T, t: T, hurst: HurstIndex<T>) -> T {
    let two_h = lit::<T>(2.0) * hurst.value();
    (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h)) / lit(2.0)
}

/// Autocovariance of fBm increments of length `dt` at integer lag `k`.
pub fn increment_autocovariance<T: Real>(k: usize, dt: T, hurst: HurstIndex<T>) -> T {
    let two_h = lit::<T>(2.0) * hurst.value();
    let kf = count::<T>(k);
    let one = T::one();
    let lower = if k == 0 { one } else { (kf - one).abs().powf(two_h) };
    dt.powf(two_h) * ((kf + one).powf(two_h) - lit::<T>(2.0) * kf.powf(two_h) + lower) / lit(2.0)
}

/// First row of the `2m × 2m` circulant embedding, with `m` the smallest power
/// of two `≥ n`.
pub fn circulant_row<T: Real>(n: usize, dt: T, hurst: HurstIndex<T>) -> Vec<T> {
    let m = n.max(1).next_power_of_two();
    let mut row = vec![T::zero(); 2 * m];
    for k in 0..=m {
        row[k] = increment_autocovariance(k, dt, hurst);
    }
    for k in 1..m {
        row[2 * m - k] = row[k];
    }
    row
}

/// Eigenvalues of the circulant embedding of the increment autocovariance.
///
/// Values in `[-tol, 0)` with `tol = 1e-8 · λ_max` are clamped to zero; anything
/// more negative is reported as [`Error::NegativeEigenvalue`].
pub fn circulant_eigenvalues<T: Real>(n: usize, dt: T, hurst: HurstIndex<T>) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidParams("grid spacing must be positive".into()));
    }
    let row = circulant_row(n, dt, hurst);
    let mut buf: Vec<Complex<T>> = row.iter().map(|&r| Complex::new(r, T::zero())).collect();
    T::fft_forward(&mut buf);
    let mut eig: Vec<T> = buf.iter().map(|c| c.re).collect();
    let max = eig.iter().copied().fold(T::zero(), T::max);
    let tol = lit::<T>(1e-8) * max;
    for (index, value) in eig.iter_mut().enumerate() {
        if *value < -tol {
            return Err(Error::NegativeEigenvalue {
                index,
                value: to_f64(*value),
                tolerance: to_f64(tol),
            });
        }
        if *value < T::zero() {
            *value = T::zero();
        }
    }
    Ok(eig)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    Circulant,
    Cholesky,
}

/// Reusable exact fBm sampler for a fixed grid.
///
/// Factorization work (eigenvalues or the Cholesky factor) is done once; each
/// call to [`FbmSampler::sample`] only draws normals.
#[derive(Clone, Debug)]
pub struct FbmSampler<T> {
    n: usize,
    dt: T,
    hurst: HurstIndex<T>,
    kind: SamplerKind<T>,
}

#[derive(Clone, Debug)]
enum SamplerKind<T> {
    Circulant { scale: Vec<T> },
    Cholesky { lower: Vec<T> },
}

impl<T: Real> FbmSampler<T> {
    pub fn new(n: usize, dt: T, hurst: HurstIndex<T>, method: SamplingMethod) -> Result<Self> {
        let kind = match method {
            SamplingMethod::Circulant => {
                let eig = circulant_eigenvalues(n, dt, hurst)?;
                let len = count::<T>(eig.len());
                SamplerKind::Circulant {
                    scale: eig.iter().map(|&l| (l / len).sqrt()).collect(),
                }
            }
            SamplingMethod::Cholesky => {
                if n == 0 || n > CHOLESKY_MAX_N {
                    return Err(Error::InvalidParams(format!(
                        "Cholesky sampling needs 1 <= n <= {CHOLESKY_MAX_N}, got {n}"
                    )));
                }
                if !(dt > T::zero()) {
                    return Err(Error::InvalidParams("grid spacing must be positive".into()));
                }
                SamplerKind::Cholesky {
                    lower: cholesky_factor(n, to_f64(dt), to_f64(hurst.value()))?
                        .into_iter()
                        .map(lit)
                        .collect(),
                }
            }
        };
        Ok(Self { n, dt, hurst, kind })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    /// fBm values at `0, Δ, …, nΔ`; `values[0] = 0`.
    pub fn sample_values(&self, seed: SeedStream) -> Vec<T> {
        let mut rng = seed.rng();
        let n = self.n;
        let mut values = Vec::with_capacity(n + 1);
        values.push(T::zero());
        match &self.kind {
            SamplerKind::Circulant { scale } => {
                let mut buf: Vec<Complex<T>> = scale
                    .iter()
                    .map(|&s| {
                        let re = T::standard_normal(&mut rng);
                        let im = T::standard_normal(&mut rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                T::fft_forward(&mut buf);
                let mut acc = T::zero();
                for c in &buf[..n] {
                    acc += c.re;
                    values.push(acc);
                }
            }
            SamplerKind::Cholesky { lower } => {
                let z: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
                for i in 0..n {
                    let row = &lower[i * n..i * n + i + 1];
                    values.push(row.iter().zip(&z).map(|(&l, &zj)| l * zj).sum());
                }
            }
        }
        values
    }

    pub fn sample(&self, seed: impl Into<SeedStream>) -> FbmPath<T> {
        let seed = seed.into();
        let values = self.sample_values(seed);
        let times = (0..=self.n).map(|k| count::<T>(k) * self.dt).collect();
        FbmPath {
            times,
            values,
            hurst: self.hurst,
            seed,
        }
    }
}

/// Row-major lower Cholesky factor of `[R_H(iΔ, jΔ)]_{i,j=1..n}`.
fn cholesky_factor(n: usize, dt: f64, hurst: f64) -> Result<Vec<f64>> {
    let h = HurstIndex::new(hurst)?;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        fbm_covariance((i + 1) as f64 * dt, (j + 1) as f64 * dt, h)
    });
    let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            out[i * n + j] = l[(i, j)];
        }
    }
    Ok(out)
}

/// Sample an fBm path on `{0, Δ, …, nΔ}`.
pub fn sample_fbm<T: Real>(
    n: usize,
    dt: T,
    hurst: HurstIndex<T>,
    seed: impl Into<SeedStream>,
    method: SamplingMethod,
) -> Result<FbmPath<T>> {
    Ok(FbmSampler::new(n, dt, hurst, method)?.sample(seed))
}

/// Gap at or below which every pair is scanned.
const HOLDER_DENSE_GAP: usize = 64;
/// Largest number of intervals for which the full pairwise scan is used.
const HOLDER_FULL_SCAN_MAX: usize = 4096;

/// Grid estimate of the Hölder coefficient `sup |w_t − w_s| / |t − s|^α`.
///
/// For paths with at most 4096 intervals every pair is scanned. Longer paths
/// scan all index gaps up to 64 plus the dyadic gaps 128, 256, …, so the
/// result is a lower bound on the grid supremum.
pub fn holder_coefficient<T: Real, P: UniformPath<T> + ?Sized>(path: &P, alpha: T) -> Result<T> {
    let h = path.hurst().value();
    if !(alpha > T::zero() && alpha < h) {
        return Err(Error::InvalidExponent {
            alpha: to_f64(alpha),
            hurst: to_f64(h),
        });
    }
    holder_coefficient_of(path.points(), path.spacing(), alpha)
}

/// [`holder_coefficient`] on raw samples, without the `α < H` guard.
pub fn holder_coefficient_of<T: Real>(values: &[T], dt: T, alpha: T) -> Result<T> {
    if values.len() < 2 {
        return Err(Error::InvalidParams("Hölder coefficient needs at least 2 points".into()));
    }
    let intervals = values.len() - 1;
    let gaps: Vec<usize> = if intervals <= HOLDER_FULL_SCAN_MAX {
        (1..=intervals).collect()
    } else {
        let mut g: Vec<usize> = (1..=HOLDER_DENSE_GAP).collect();
        let mut d = 2 * HOLDER_DENSE_GAP;
        while d <= intervals {
            g.push(d);
            d *= 2;
        }
        g
    };
    let mut best = T::zero();
    for gap in gaps {
        let inv = T::one() / (count::<T>(gap) * dt).powf(alpha);
        let widest = values
            .iter()
            .zip(&values[gap..])
            .map(|(&a, &b)| (b - a).abs())
            .fold(T::zero(), T::max);
        best = best.max(widest * inv);
    }
    Ok(best)
}
