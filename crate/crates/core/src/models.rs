//! Drift functions and smoothing kernels, with lattice certification of the
//! regularity assumptions the estimator relies on.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstIndex;
use crate::quadrature::adaptive_simpson;
use crate::scalar::{count, lit, to_f64, Real};

/// Closed-form drift families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DriftKind<T> {
    /// `b(x) = −θx`
    Linear { theta: T },
    /// `b(x) = −x − x³`
    Cubic,
    /// `b(x) = −θx + a·sin x`
    LinearPlusSine { theta: T, amplitude: T },
    /// `b(x) = c`; a test model, not dissipative.
    Constant { value: T },
}

/// Drift function with the constants of its regularity assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftModel<T> {
    pub kind: DriftKind<T>,
    /// Global Lipschitz constant `L`, absent when none exists.
    pub lipschitz: Option<T>,
    /// One-sided dissipativity constant `M`.
    pub dissipativity: Option<T>,
    /// Degree `m` in `|b| + |b′| ≤ C(1 + |x|^m)`.
    pub poly_degree: u32,
    /// Constant `C` in the growth bound.
    pub growth_constant: T,
    pub sup_b: Option<T>,
    pub sup_b_prime: Option<T>,
}

impl<T: Real> DriftModel<T> {
    pub fn linear(theta: T) -> Result<Self> {
        if !(theta > T::zero()) {
            return Err(Error::InvalidParams(format!("linear drift needs theta > 0, got {theta}")));
        }
        Ok(Self {
            kind: DriftKind::Linear { theta },
            lipschitz: Some(theta),
            dissipativity: Some(theta),
            poly_degree: 1,
            growth_constant: theta,
            sup_b: None,
            sup_b_prime: Some(theta),
        })
    }

    pub fn cubic() -> Self {
        Self {
            kind: DriftKind::Cubic,
            lipschitz: None,
            dissipativity: Some(T::one()),
            poly_degree: 3,
            growth_constant: lit(4.0),
            sup_b: None,
            sup_b_prime: None,
        }
    }

    pub fn linear_plus_sine(theta: T, amplitude: T) -> Result<Self> {
        if !(amplitude >= T::zero() && theta > amplitude) {
            return Err(Error::InvalidParams(format!(
                "linear_plus_sine needs theta > amplitude >= 0, got theta={theta}, amplitude={amplitude}"
            )));
        }
        Ok(Self {
            kind: DriftKind::LinearPlusSine { theta, amplitude },
            lipschitz: Some(theta + amplitude),
            dissipativity: Some(theta - amplitude),
            poly_degree: 1,
            growth_constant: theta + amplitude,
            sup_b: None,
            sup_b_prime: Some(theta + amplitude),
        })
    }

    pub fn constant(value: T) -> Self {
        Self {
            kind: DriftKind::Constant { value },
            lipschitz: Some(T::zero()),
            dissipativity: None,
            poly_degree: 0,
            growth_constant: value.abs(),
            sup_b: Some(value.abs()),
            sup_b_prime: Some(T::zero()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DriftKind::Linear { .. } => "linear",
            DriftKind::Cubic => "cubic",
            DriftKind::LinearPlusSine { .. } => "linear_plus_sine",
            DriftKind::Constant { .. } => "constant",
        }
    }

    #[inline]
    pub fn b(&self, x: T) -> T {
        match self.kind {
            DriftKind::Linear { theta } => -theta * x,
            DriftKind::Cubic => -x - x * x * x,
            DriftKind::LinearPlusSine { theta, amplitude } => -theta * x + amplitude * x.sin(),
            DriftKind::Constant { value } => value,
        }
    }

    #[inline]
    pub fn b_prime(&self, x: T) -> T {
        match self.kind {
            DriftKind::Linear { theta } => -theta,
            DriftKind::Cubic => -T::one() - lit::<T>(3.0) * x * x,
            DriftKind::LinearPlusSine { theta, amplitude } => -theta + amplitude * x.cos(),
            DriftKind::Constant { .. } => T::zero(),
        }
    }

    /// `sup_{|u − x| ≤ h} |b′(u)|`, exact for the built-in families.
    pub fn local_sup_b_prime(&self, x: T, h: T) -> T {
        match self.kind {
            DriftKind::Linear { theta } => theta,
            DriftKind::Cubic => {
                let far = x.abs() + h;
                T::one() + lit::<T>(3.0) * far * far
            }
            DriftKind::LinearPlusSine { theta, amplitude } => {
                // |−θ + a cos u| is largest where cos u is smallest on the window
                let lo = x - h;
                let hi = x + h;
                let pi = T::PI();
                let two_pi = pi + pi;
                let k = ((lo - pi) / two_pi).ceil();
                let min_cos = if pi + k * two_pi <= hi {
                    -T::one()
                } else {
                    lo.cos().min(hi.cos())
                };
                theta - amplitude * min_cos
            }
            DriftKind::Constant { .. } => T::zero(),
        }
    }
}

/// Look up a drift family by name. Recognized parameters: `theta`,
/// `amplitude`, and `value` for the constant test drift.
pub fn builtin_drift<T: Real>(name: &str, params: &BTreeMap<String, T>) -> Result<DriftModel<T>> {
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or_else(|| lit(default));
    match name {
        "linear" => DriftModel::linear(get("theta", 1.0)),
        "cubic" => Ok(DriftModel::cubic()),
        "linear_plus_sine" => DriftModel::linear_plus_sine(get("theta", 2.0), get("amplitude", 0.5)),
        "constant" => Ok(DriftModel::constant(get("value", 0.0))),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(15/16)(1 − u²)²` on `[−1, 1]`
    #[default]
    Biweight,
    /// `(35/32)(1 − u²)³` on `[−1, 1]`
    Triweight,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Biweight => "biweight",
            Kernel::Triweight => "triweight",
        }
    }

    #[inline]
    pub fn k<T: Real>(self, u: T) -> T {
        if u.abs() >= T::one() {
            return T::zero();
        }
        let w = T::one() - u * u;
        match self {
            Kernel::Biweight => lit::<T>(15.0 / 16.0) * w * w,
            Kernel::Triweight => lit::<T>(35.0 / 32.0) * w * w * w,
        }
    }

    #[inline]
    pub fn k_prime<T: Real>(self, u: T) -> T {
        if u.abs() >= T::one() {
            return T::zero();
        }
        let w = T::one() - u * u;
        match self {
            Kernel::Biweight => -lit::<T>(15.0 / 4.0) * u * w,
            Kernel::Triweight => -lit::<T>(105.0 / 16.0) * u * w * w,
        }
    }

    /// `K_h(u) = K(u/h)/h`.
    #[inline]
    pub fn scaled<T: Real>(self, h: T, u: T) -> T {
        self.k(u / h) / h
    }

    /// `K_h′(u) = K′(u/h)/h²`.
    #[inline]
    pub fn scaled_prime<T: Real>(self, h: T, u: T) -> T {
        self.k_prime(u / h) / (h * h)
    }

    /// `‖K‖_∞ = K(0)`.
    pub fn sup_abs<T: Real>(self) -> T {
        self.k(T::zero())
    }

    /// `‖K′‖_∞`, attained at `u = 1/√3` (biweight) or `u = 1/√5` (triweight).
    pub fn sup_abs_prime<T: Real>(self) -> T {
        let u = match self {
            Kernel::Biweight => T::one() / lit::<T>(3.0).sqrt(),
            Kernel::Triweight => T::one() / lit::<T>(5.0).sqrt(),
        };
        self.k_prime(u).abs()
    }

    /// Second moment `∫u²K(u)du`.
    pub fn second_moment<T: Real>(self) -> T {
        match self {
            Kernel::Biweight => lit(1.0 / 7.0),
            Kernel::Triweight => lit(1.0 / 9.0),
        }
    }
}

/// Look up a kernel by name.
pub fn builtin_kernel(name: &str) -> Result<Kernel> {
    match name {
        "biweight" => Ok(Kernel::Biweight),
        "triweight" => Ok(Kernel::Triweight),
        other => Err(Error::UnknownKernel(other.to_string())),
    }
}

/// `K_h(u) = K(u/h)/h`.
pub fn scaled_kernel_eval<T: Real>(kernel: Kernel, h: T, u: T) -> T {
    kernel.scaled(h, u)
}

/// Outcome of one assumption check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub holds: bool,
    pub detail: String,
}

impl AssumptionCheck {
    fn new(holds: bool, detail: impl Into<String>) -> Self {
        Self {
            holds,
            detail: detail.into(),
        }
    }
}

/// Which regularity assumptions a configuration satisfies. All checks are
/// warnings; nothing here aborts an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// i. global Lipschitz drift
    pub lipschitz: AssumptionCheck,
    /// ii. polynomial growth of `b` and `b′`
    pub growth: AssumptionCheck,
    /// iii. one-sided dissipativity
    pub dissipativity: AssumptionCheck,
    /// iv. `γ > max{1 + m²H, 2}`
    pub observation_rate: AssumptionCheck,
    /// v. kernel regularity (unchecked when no kernel is supplied)
    pub kernel: Option<AssumptionCheck>,
    /// vi. bounded `b` and `b′`
    pub boundedness: AssumptionCheck,
    pub required_gamma: f64,
    pub growth_constant: f64,
    pub poly_degree: u32,
}

impl AssumptionReport {
    /// i–iv and vi hold, and v holds when checked.
    pub fn all_hold(&self) -> bool {
        self.lipschitz.holds
            && self.growth.holds
            && self.dissipativity.holds
            && self.observation_rate.holds
            && self.boundedness.holds
            && self.kernel.as_ref().is_none_or(|k| k.holds)
    }

    /// Everything except boundedness, which no dissipative drift can satisfy;
    /// runs that pass this are labelled as covered by the consistency result.
    pub fn covered(&self) -> bool {
        self.lipschitz.holds
            && self.growth.holds
            && self.dissipativity.holds
            && self.observation_rate.holds
            && self.kernel.as_ref().is_none_or(|k| k.holds)
    }

    /// Compact flag string such as `i+ ii+ iii+ iv+ v+ vi-`.
    pub fn flags(&self) -> String {
        let mark = |b: bool| if b { '+' } else { '-' };
        let v = match &self.kernel {
            Some(k) => mark(k.holds),
            None => '?',
        };
        format!(
            "i{} ii{} iii{} iv{} v{} vi{}",
            mark(self.lipschitz.holds),
            mark(self.growth.holds),
            mark(self.dissipativity.holds),
            mark(self.observation_rate.holds),
            v,
            mark(self.boundedness.holds),
        )
    }
}

/// Lattice `[−5, 5]` with step 0.01 used for certification.
fn lattice<T: Real>() -> Vec<T> {
    (0..=1000).map(|i| lit::<T>(-5.0) + count::<T>(i) * lit(0.01)).collect()
}

fn lattice_lipschitz<T: Real>(model: &DriftModel<T>, l: T, pts: &[T]) -> bool {
    let b: Vec<T> = pts.iter().map(|&x| model.b(x)).collect();
    let slack = lit::<T>(1e-12);
    (0..pts.len()).all(|i| {
        (i + 1..pts.len()).all(|j| {
            let dx = (pts[i] - pts[j]).abs();
            (b[i] - b[j]).abs() <= l * dx * (T::one() + slack) + slack
        })
    })
}

fn lattice_dissipative<T: Real>(model: &DriftModel<T>, m: T, pts: &[T]) -> bool {
    let b: Vec<T> = pts.iter().map(|&x| model.b(x)).collect();
    let slack = lit::<T>(1e-12);
    (0..pts.len()).all(|i| {
        (i + 1..pts.len()).all(|j| {
            let dx = pts[i] - pts[j];
            (b[i] - b[j]) * dx <= -m * dx * dx * (T::one() - slack) + slack
        })
    })
}

fn lattice_growth<T: Real>(model: &DriftModel<T>, pts: &[T]) -> bool {
    let c = model.growth_constant;
    let m = model.poly_degree as i32;
    pts.iter().all(|&x| {
        let bound = c * (T::one() + x.abs().powi(m));
        model.b(x).abs() + model.b_prime(x).abs() <= bound * (T::one() + lit(1e-12))
    })
}

/// Kernel regularity: nonnegative on a 10 001-point lattice of `[−1.5, 1.5]`,
/// zero outside `[−1, 1]`, unit mass, and `K′` consistent with central
/// differences of `K`.
pub fn check_kernel(kernel: Kernel) -> AssumptionCheck {
    let pts: Vec<f64> = (0..=10_000).map(|i| -1.5 + 3.0 * i as f64 / 10_000.0).collect();
    let nonneg = pts.iter().all(|&u| kernel.k(u) >= 0.0);
    let support = pts.iter().filter(|u| u.abs() > 1.0).all(|&u| kernel.k(u) == 0.0);
    let mass: f64 = adaptive_simpson(|u: f64| kernel.k(u), -1.0, 1.0, 1e-12);
    let step = 1e-5;
    let derivative = pts.iter().all(|&u| {
        let fd: f64 = (kernel.k(u + step) - kernel.k(u - step)) / (2.0 * step);
        (fd - kernel.k_prime(u)).abs() <= 1e-6
    });
    let boundary = kernel.k_prime(1.0) == 0.0 && kernel.k_prime(-1.0) == 0.0;
    let holds = nonneg && support && (mass - 1.0).abs() <= 1e-8 && derivative && boundary;
    AssumptionCheck::new(
        holds,
        format!(
            "{kernel}: nonnegative={nonneg}, compact support={support}, mass={mass:.12}, C1={}",
            derivative && boundary
        ),
    )
}

/// Report which assumptions hold for `model` observed at rate exponent `gamma`.
pub fn validate_assumptions<T: Real>(
    model: &DriftModel<T>,
    kernel: Option<Kernel>,
    gamma: T,
    hurst: HurstIndex<T>,
) -> AssumptionReport {
    let pts = lattice::<T>();
    let lipschitz = match model.lipschitz {
        Some(l) if lattice_lipschitz(model, l, &pts) => {
            AssumptionCheck::new(true, format!("L = {l} (lattice-checked)"))
        }
        Some(l) => AssumptionCheck::new(false, format!("declared L = {l} violated on lattice")),
        None => AssumptionCheck::new(false, "no global Lipschitz constant"),
    };
    let growth_ok = lattice_growth(model, &pts);
    let growth = AssumptionCheck::new(
        growth_ok,
        format!(
            "|b|+|b'| <= {}(1+|x|^{}) {}",
            model.growth_constant,
            model.poly_degree,
            if growth_ok { "(lattice-checked)" } else { "violated on lattice" }
        ),
    );
    let dissipativity = match model.dissipativity {
        Some(m) if m > T::zero() && lattice_dissipative(model, m, &pts) => {
            AssumptionCheck::new(true, format!("M = {m} (lattice-checked)"))
        }
        Some(m) => AssumptionCheck::new(false, format!("declared M = {m} violated on lattice")),
        None => AssumptionCheck::new(false, "drift is not dissipative"),
    };
    let m = model.poly_degree as f64;
    let h = to_f64(hurst.value());
    let required_gamma = (1.0 + m * m * h).max(2.0);
    let g = to_f64(gamma);
    let observation_rate = AssumptionCheck::new(
        g > required_gamma,
        format!("gamma = {g} vs required > {required_gamma}"),
    );
    let boundedness = match (model.sup_b, model.sup_b_prime) {
        (Some(sb), Some(sbp)) => AssumptionCheck::new(true, format!("||b|| = {sb}, ||b'|| = {sbp}")),
        (None, _) => AssumptionCheck::new(false, "||b||_inf = inf (drift unbounded)"),
        (_, None) => AssumptionCheck::new(false, "||b'||_inf = inf"),
    };
    AssumptionReport {
        lipschitz,
        growth,
        dissipativity,
        observation_rate,
        kernel: kernel.map(check_kernel),
        boundedness,
        required_gamma,
        growth_constant: to_f64(model.growth_constant),
        poly_degree: model.poly_degree,
    }
}
