//! Euler simulation of `dX = b(X)dt + σ dB^H` on a refined grid, observed on
//! the coarse grid `t_k = k·α_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmPath, FbmSampler, HurstIndex, SamplingMethod, UniformPath};
use crate::models::DriftModel;
use crate::rng::SeedStream;
use crate::scalar::{count, lit, Real};

/// Equispaced observation times `t_k = k·α_n`, `k = 0..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationGrid<T> {
    pub n: usize,
    /// Spacing `α_n`.
    pub spacing: T,
    /// Rate exponent `γ` in `α_n = c_α n^{−1+1/γ}`; absent for grids built
    /// directly from data.
    pub gamma: Option<T>,
    pub c_alpha: Option<T>,
}

impl<T: Real> ObservationGrid<T> {
    pub fn from_spacing(n: usize, spacing: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("grid needs n >= 1".into()));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidParams("grid spacing must be positive".into()));
        }
        Ok(Self {
            n,
            spacing,
            gamma: None,
            c_alpha: None,
        })
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        count::<T>(k) * self.spacing
    }

    /// `t_n = n·α_n`.
    pub fn horizon(&self) -> T {
        self.time(self.n)
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }
}

/// Grid with `α_n = c_α · n^{−1+1/γ}`.
pub fn make_grid<T: Real>(n: usize, gamma: T, c_alpha: T) -> Result<ObservationGrid<T>> {
    if !(gamma > T::one()) {
        return Err(Error::InvalidGamma(crate::scalar::to_f64(gamma)));
    }
    if !(c_alpha > T::zero()) {
        return Err(Error::InvalidParams("c_alpha must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParams("grid needs n >= 1".into()));
    }
    let spacing = c_alpha * count::<T>(n).powf(-T::one() + T::one() / gamma);
    Ok(ObservationGrid {
        n,
        spacing,
        gamma: Some(gamma),
        c_alpha: Some(c_alpha),
    })
}

/// Simulation settings besides the drift and the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeParams<T> {
    pub sigma: T,
    /// Initial state before burn-in.
    pub x0: T,
    pub hurst: HurstIndex<T>,
    /// Fine steps per observation interval.
    pub refine: usize,
    /// Length of the discarded warm-up segment.
    pub burn_in: T,
}

impl<T: Real> SdeParams<T> {
    /// `refine = 16`, `burn_in = 20`, `x0 = 0`.
    pub fn new(sigma: T, hurst: HurstIndex<T>) -> Self {
        Self {
            sigma,
            x0: T::zero(),
            hurst,
            refine: 16,
            burn_in: lit(20.0),
        }
    }

    pub fn with_x0(mut self, x0: T) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_refine(mut self, refine: usize) -> Self {
        self.refine = refine;
        self
    }

    pub fn with_burn_in(mut self, burn_in: T) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// Fine-grid internals of a simulated path.
///
/// Fine index `j` sits at time `(j − offset)·δ`, so the burn-in segment
/// occupies negative times and the observation window starts at index
/// `offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct FineGrid<T> {
    pub delta: T,
    pub refine: usize,
    pub offset: usize,
    pub values: Vec<T>,
    /// Driving fBm sampled over the whole fine grid (burn-in included).
    pub fbm: FbmPath<T>,
}

impl<T: Real> FineGrid<T> {
    pub fn time(&self, j: usize) -> T {
        (count::<T>(j) - count::<T>(self.offset)) * self.delta
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.values.len()).map(|j| self.time(j)).collect()
    }

    /// Fine index of observation `k`.
    #[inline]
    pub fn obs_index(&self, k: usize) -> usize {
        self.offset + k * self.refine
    }
}

/// Observed trajectory plus, for simulated paths, the fine-grid ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath<T> {
    pub grid: ObservationGrid<T>,
    /// `X_{t_k}` for `k = 0..=n`.
    pub obs: Vec<T>,
    pub fine: Option<FineGrid<T>>,
    pub model_tag: String,
    pub sigma: T,
    pub hurst: HurstIndex<T>,
    /// State at `t = 0`, i.e. after burn-in.
    pub x0: T,
    pub burn_in: T,
    pub seed: Option<SeedStream>,
}

impl<T: Real> SamplePath<T> {
    /// Wrap bare observations (no fine grid) for data-only estimation.
    pub fn from_observations(obs: Vec<T>, spacing: T, hurst: HurstIndex<T>) -> Result<Self> {
        if obs.len() < 2 {
            return Err(Error::InvalidParams("need at least two observations".into()));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("observations must be finite".into()));
        }
        let grid = ObservationGrid::from_spacing(obs.len() - 1, spacing)?;
        Ok(Self {
            grid,
            x0: obs[0],
            obs,
            fine: None,
            model_tag: "observed".into(),
            sigma: T::nan(),
            hurst,
            burn_in: T::zero(),
            seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn fine(&self) -> Result<&FineGrid<T>> {
        self.fine.as_ref().ok_or(Error::MissingFineGrid)
    }

    /// `X_{t_{k+1}} − X_{t_k}`.
    #[inline]
    pub fn increment(&self, k: usize) -> T {
        self.obs[k + 1] - self.obs[k]
    }

    /// `B^H_{t_{k+1}} − B^H_{t_k}` of the driving noise.
    pub fn fbm_increment(&self, k: usize) -> Result<T> {
        let fine = self.fine()?;
        let b = &fine.fbm.values;
        Ok(b[fine.obs_index(k + 1)] - b[fine.obs_index(k)])
    }
}

impl<T: Real> UniformPath<T> for SamplePath<T> {
    fn spacing(&self) -> T {
        self.grid.spacing
    }
    fn points(&self) -> &[T] {
        &self.obs
    }
    fn hurst(&self) -> HurstIndex<T> {
        self.hurst
    }
}

/// Simulate on a `refine`-times finer grid, discard `burn_in`, and keep every
/// `refine`-th value as an observation.
pub fn simulate<T: Real>(
    model: &DriftModel<T>,
    params: &SdeParams<T>,
    grid: &ObservationGrid<T>,
    seed: impl Into<SeedStream>,
) -> Result<SamplePath<T>> {
    let seed = seed.into();
    if params.refine == 0 {
        return Err(Error::InvalidParams("refine must be at least 1".into()));
    }
    if !params.sigma.is_finite() || !params.x0.is_finite() {
        return Err(Error::InvalidParams("sigma and x0 must be finite".into()));
    }
    if !(params.burn_in >= T::zero()) {
        return Err(Error::InvalidParams("burn_in must be nonnegative".into()));
    }
    let delta = grid.spacing / count::<T>(params.refine);
    let offset = (params.burn_in / delta)
        .ceil()
        .to_usize()
        .ok_or_else(|| Error::InvalidParams("burn_in too long".into()))?;
    let steps = offset + grid.n * params.refine;
    let fbm = FbmSampler::new(steps, delta, params.hurst, SamplingMethod::Circulant)?.sample(seed);
    let values = euler(model, params.sigma, params.x0, delta, &fbm.values)?;
    let obs = (0..=grid.n).map(|k| values[offset + k * params.refine]).collect();
    Ok(SamplePath {
        grid: *grid,
        obs,
        x0: values[offset],
        burn_in: count::<T>(offset) * delta,
        fine: Some(FineGrid {
            delta,
            refine: params.refine,
            offset,
            values,
            fbm,
        }),
        model_tag: model.name().to_string(),
        sigma: params.sigma,
        hurst: params.hurst,
        seed: Some(seed),
    })
}

/// `X_{j+1} = X_j + b(X_j)δ + σ(B_{j+1} − B_j)`.
fn euler<T: Real>(model: &DriftModel<T>, sigma: T, x0: T, delta: T, noise: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(noise.len());
    let mut x = x0;
    out.push(x);
    for (j, w) in noise.windows(2).enumerate() {
        x = x + model.b(x) * delta + sigma * (w[1] - w[0]);
        if !x.is_finite() {
            return Err(Error::NonFiniteState { step: j + 1 });
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::holder_coefficient_of;

    fn h(v: f64) -> HurstIndex<f64> {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = make_grid::<f64>(100, 2.0, 1.0).unwrap();
        assert!((g.spacing - 0.1).abs() < 1e-15);
        assert!((g.horizon() - 10.0).abs() < 1e-12);
        let g = make_grid::<f64>(10_000, 2.0, 1.0).unwrap();
        assert!((g.spacing - 0.01).abs() < 1e-15);
        assert!((g.horizon() - 100.0).abs() < 1e-10);
        let a = make_grid(500, 2.5, 1.0).unwrap().horizon();
        let b = make_grid(2000, 2.5, 1.0).unwrap().horizon();
        assert!((b / a - 4f64.powf(1.0 / 2.5)).abs() < 1e-12);
        assert!(matches!(make_grid(10, 1.0, 1.0), Err(Error::InvalidGamma(_))));
    }

    #[test]
    fn horizon_grows_along_sweep() {
        let mut last = 0.0;
        for e in 6..16 {
            let t = make_grid(1 << e, 2.5, 1.0).unwrap().horizon();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn noiseless_linear_tracks_exponential_decay() {
        let model = DriftModel::linear(1.0).unwrap();
        let params = SdeParams::new(0.0, h(0.7)).with_x0(1.0).with_refine(64).with_burn_in(0.0);
        let grid = make_grid(100, 2.0, 1.0).unwrap();
        let path = simulate(&model, &params, &grid, 3).unwrap();
        for (k, &x) in path.obs.iter().enumerate() {
            assert!((x - (-grid.time(k)).exp()).abs() <= 0.01);
        }
    }

    #[test]
    fn zero_drift_reproduces_scaled_fbm() {
        let model = DriftModel::constant(0.0);
        let params = SdeParams::new(0.8, h(0.65)).with_x0(0.3).with_burn_in(1.0);
        let grid = make_grid(64, 2.5, 1.0).unwrap();
        let path = simulate(&model, &params, &grid, 5).unwrap();
        let fine = path.fine().unwrap();
        for (x, b) in fine.values.iter().zip(&fine.fbm.values) {
            assert!((x - (0.3 + 0.8 * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn observations_are_fine_values() {
        let model = DriftModel::linear(1.0).unwrap();
        let params = SdeParams::new(0.5, h(0.7)).with_refine(8).with_burn_in(2.0);
        let grid = make_grid(200, 2.5, 1.0).unwrap();
        let path = simulate(&model, &params, &grid, 1).unwrap();
        let fine = path.fine().unwrap();
        assert_eq!(path.obs.len(), 201);
        assert_eq!(fine.values.len(), fine.offset + 200 * 8 + 1);
        for k in 0..=200 {
            assert_eq!(path.obs[k], fine.values[fine.obs_index(k)]);
        }
        assert_eq!(path.x0, path.obs[0]);
        assert!(fine.time(fine.offset).abs() < 1e-15);
        assert!(fine.time(0) < 0.0);
    }

    #[test]
    fn representation_identity() {
        let model = DriftModel::cubic();
        let params = SdeParams::new(0.5, h(0.7)).with_refine(16).with_burn_in(5.0);
        let grid = make_grid(256, 2.5, 1.0).unwrap();
        let path = simulate(&model, &params, &grid, 8).unwrap();
        let fine = path.fine().unwrap();
        for k in 0..grid.n {
            let lo = fine.obs_index(k);
            let drift: f64 = (lo..lo + fine.refine).map(|j| model.b(fine.values[j]) * fine.delta).sum();
            let rhs = drift + 0.5 * path.fbm_increment(k).unwrap();
            let lhs = path.increment(k);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-3), "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn explosive_configuration_is_reported() {
        let model = DriftModel::constant(1e308);
        let params = SdeParams::new(0.0, h(0.7)).with_burn_in(0.0).with_x0(1e308);
        let grid = make_grid(10, 2.5, 1.0).unwrap();
        assert!(matches!(
            simulate(&model, &params, &grid, 0),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn stationary_mean_is_zero() {
        // Monte-Carlo oracle: the stationary fOU law is centred
        let model = DriftModel::linear(1.0).unwrap();
        let params = SdeParams::new(0.5, h(0.7)).with_burn_in(50.0).with_refine(4).with_x0(2.0);
        let grid = ObservationGrid::from_spacing(4000, 0.05).unwrap();
        let means: Vec<f64> = (0..20)
            .map(|r| {
                let p = simulate(&model, &params, &grid, SeedStream::new(17, r)).unwrap();
                crate::stats::mean(&p.obs)
            })
            .collect();
        let m = crate::stats::mean(&means);
        let se = crate::stats::std_err(&means);
        assert!(m.abs() <= 4.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn doubling_refine_halves_strong_error() {
        // same fBm sample at every resolution: a refine=1024 path is the reference
        let model = DriftModel::cubic();
        let (n, alpha, hurst, sigma) = (16usize, 0.25, h(0.7), 0.5);
        let mut ratios = Vec::new();
        for seed in 0..20u64 {
            let steps = n * 1024;
            let delta = alpha / 1024.0;
            let fbm = FbmSampler::new(steps, delta, hurst, SamplingMethod::Circulant)
                .unwrap()
                .sample(SeedStream::new(77, seed));
            let run = |refine: usize| {
                let stride = 1024 / refine;
                let noise: Vec<f64> = fbm.values.iter().step_by(stride).copied().collect();
                let vals = euler(&model, sigma, 1.0, alpha / refine as f64, &noise).unwrap();
                vals.into_iter().step_by(refine).collect::<Vec<f64>>()
            };
            let reference = run(1024);
            let err = |refine: usize| {
                run(refine)
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            };
            ratios.push(err(16) / err(32));
        }
        let r = crate::stats::median(&ratios);
        assert!((1.5..=3.0).contains(&r), "median error ratio {r}");
    }

    #[test]
    fn increment_bound_from_holder_coefficient() {
        let model = DriftModel::linear(1.0).unwrap();
        let hurst = h(0.7);
        let params = SdeParams::new(0.5, hurst);
        let grid = make_grid(1024, 2.5, 1.0).unwrap();
        let path = simulate(&model, &params, &grid, 2).unwrap();
        let fine = path.fine().unwrap();
        let a = 0.65;
        let eta = 1.5 * holder_coefficient_of(&fine.fbm.values, fine.delta, a).unwrap();
        let l = model.lipschitz.unwrap();
        let an = grid.spacing;
        for k in 0..grid.n {
            let lo = fine.obs_index(k);
            let xk = fine.values[lo];
            let sup = (lo..lo + fine.refine).map(|j| (fine.values[j] - xk).abs()).fold(0.0, f64::max);
            let bound = (0.5 * eta * an.powf(a) + model.b(xk) * an).abs() * (l * an).exp() + 1e-12;
            assert!(sup <= bound, "k={k}: {sup} > {bound}");
        }
    }
}
