//! Ergodic averages along one trajectory.
//!
//! `time_average` integrates `φ(X_s)` over `[0, t_n]` on the fine grid;
//! `step_average` is the left-endpoint step-function version built from the
//! observations alone. Both target `E φ(X̄)` under the stationary law.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fbm::HurstIndex;
use crate::models::{DriftKind, DriftModel};
use crate::quadrature::trapezoid;
use crate::rng::SeedStream;
use crate::scalar::{count, lit, to_f64, Real};
use crate::sde::{simulate, ObservationGrid, SamplePath, SdeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    Identity,
    Square,
    Quartic,
    Cos,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [
        TestFunction::One,
        TestFunction::Identity,
        TestFunction::Square,
        TestFunction::Quartic,
        TestFunction::Cos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Identity => "identity",
            TestFunction::Square => "square",
            TestFunction::Quartic => "quartic",
            TestFunction::Cos => "cos",
        }
    }

    pub fn phi<T: Real>(self, x: T) -> T {
        match self {
            TestFunction::One => T::one(),
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Quartic => x.powi(4),
            TestFunction::Cos => x.cos(),
        }
    }

    pub fn phi_prime<T: Real>(self, x: T) -> T {
        match self {
            TestFunction::One => T::zero(),
            TestFunction::Identity => T::one(),
            TestFunction::Square => lit::<T>(2.0) * x,
            TestFunction::Quartic => lit::<T>(4.0) * x.powi(3),
            TestFunction::Cos => -x.sin(),
        }
    }

    /// `(C_φ, p)` with `|φ(x)| + |φ′(x)| ≤ C_φ(1 + |x|^p)`.
    pub fn growth(self) -> (f64, u32) {
        match self {
            TestFunction::One => (1.0, 0),
            TestFunction::Identity => (1.0, 1),
            TestFunction::Square => (2.0, 2),
            // 4|x|³ ≤ 3x⁴ + 1
            TestFunction::Quartic => (4.0, 4),
            TestFunction::Cos => (std::f64::consts::SQRT_2, 0),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn builtin_test_function(name: &str) -> Result<TestFunction> {
    TestFunction::ALL
        .into_iter()
        .find(|t| t.name() == name)
        .ok_or_else(|| Error::UnknownTestFunction(name.to_string()))
}

/// `(1/t_n) ∫_0^{t_n} φ(X_s) ds`, trapezoid rule on the fine grid.
pub fn time_average<T: Real>(path: &SamplePath<T>, phi: TestFunction) -> Result<T> {
    let fine = path.fine()?;
    let end = fine.obs_index(path.n());
    let values: Vec<T> = fine.values[fine.offset..=end].iter().map(|&x| phi.phi(x)).collect();
    Ok(trapezoid(&values, fine.delta) / path.grid.horizon())
}

/// `(1/n) Σ_{k<n} φ(X_{t_k})`.
pub fn step_average<T: Real>(path: &SamplePath<T>, phi: TestFunction) -> T {
    let n = path.n();
    let sum: T = path.obs[..n].iter().map(|&x| phi.phi(x)).sum();
    sum / count::<T>(n)
}

/// Rate condition under which the step average is covered by the ergodic
/// theorem: `γ > 1 + (m² + p)H` and `γ > p + 1`.
pub fn theorem_covered(poly_degree: u32, phi: TestFunction, gamma: f64, hurst: f64) -> bool {
    let m = poly_degree as f64;
    let p = phi.growth().1 as f64;
    gamma > 1.0 + (m * m + p) * hurst && gamma > p + 1.0
}

/// `σ²HΓ(2H)θ^{−2H}`, the stationary variance of the fractional OU process.
pub fn fou_stationary_variance(theta: f64, sigma: f64, hurst: f64) -> f64 {
    sigma * sigma * hurst * gamma(2.0 * hurst) * theta.powf(-2.0 * hurst)
}

/// `E φ(X̄)` for the linear drift, where `X̄ ~ N(0, σ²HΓ(2H)θ^{−2H})`.
pub fn closed_form_reference<T: Real>(
    model: &DriftModel<T>,
    sigma: T,
    hurst: HurstIndex<T>,
    phi: TestFunction,
) -> Option<f64> {
    let DriftKind::Linear { theta } = model.kind else {
        return None;
    };
    let v = fou_stationary_variance(to_f64(theta), to_f64(sigma), to_f64(hurst.value()));
    Some(match phi {
        TestFunction::One => 1.0,
        TestFunction::Identity => 0.0,
        TestFunction::Square => v,
        TestFunction::Quartic => 3.0 * v * v,
        TestFunction::Cos => (-v / 2.0).exp(),
    })
}

/// Pooled time average over `seeds` independent paths with a horizon `scale`
/// times longer than `grid`'s, at the same spacing.
pub fn simulated_reference<T: Real>(
    model: &DriftModel<T>,
    params: &SdeParams<T>,
    grid: &ObservationGrid<T>,
    phi: TestFunction,
    seed: u64,
    seeds: u64,
    scale: usize,
) -> Result<f64> {
    let long = ObservationGrid::from_spacing(grid.n * scale, grid.spacing)?;
    let values: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            // offset streams keep the oracle independent of the checked path
            let path = simulate(model, params, &long, SeedStream::new(seed, 1_000_000 + r))?;
            Ok(to_f64(time_average(&path, phi)?))
        })
        .collect::<Result<_>>()?;
    Ok(crate::stats::mean(&values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub phi: String,
    pub estimate_step: f64,
    pub estimate_time: f64,
    pub reference: f64,
    pub reference_kind: String,
    pub covered_by_theorem: bool,
    pub n: usize,
    pub t_n: f64,
    pub alpha_n: f64,
}

/// Both averages on one simulated path, against the stationary reference
/// (closed form for the linear drift, pooled long simulation otherwise).
pub fn ergodic_check<T: Real>(
    model: &DriftModel<T>,
    params: &SdeParams<T>,
    grid: &ObservationGrid<T>,
    seed: u64,
    phi: TestFunction,
) -> Result<ErgodicReport> {
    let path = simulate(model, params, grid, seed)?;
    let (reference, reference_kind) = match closed_form_reference(model, params.sigma, params.hurst, phi) {
        Some(r) => (r, "closed-form"),
        None => (simulated_reference(model, params, grid, phi, seed, 10, 10)?, "simulated"),
    };
    let gamma = grid.gamma.map(to_f64).unwrap_or(f64::NAN);
    Ok(ErgodicReport {
        phi: phi.name().to_string(),
        estimate_step: to_f64(step_average(&path, phi)),
        estimate_time: to_f64(time_average(&path, phi)?),
        reference,
        reference_kind: reference_kind.to_string(),
        covered_by_theorem: theorem_covered(model.poly_degree, phi, gamma, to_f64(params.hurst.value())),
        n: grid.n,
        t_n: to_f64(grid.horizon()),
        alpha_n: to_f64(grid.spacing),
    })
}
