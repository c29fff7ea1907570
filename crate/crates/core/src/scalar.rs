//! Scalar abstraction shared by every numerical routine in the crate.

use std::cell::RefCell;
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the simulators and estimators are generic over.
///
/// Implemented for `f32` and `f64`. The two non-arithmetic hooks exist
/// because normal sampling and FFT planning are type-specific in the
/// underlying crates.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Draw one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// In-place forward DFT (unnormalized, `exp(-2πi jk/N)` convention).
    fn fft_forward(buf: &mut [Complex<Self>]);
}

thread_local! {
    static PLANNER_F64: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANNER_F32: RefCell<FftPlanner<f32>> = RefCell::new(FftPlanner::new());
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn fft_forward(buf: &mut [Complex<Self>]) {
        let plan = PLANNER_F64.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
        plan.process(buf);
    }
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn fft_forward(buf: &mut [Complex<Self>]) {
        let plan = PLANNER_F32.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
        plan.process(buf);
    }
}

/// Convert an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Convert a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
