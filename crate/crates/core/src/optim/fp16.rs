//! Software emulation of IEEE-754 binary16 storage.

use crate::linalg::{Matrix, Vector};
use half::f16;
use std::cell::Cell;

thread_local! {
    static CLAMPED: Cell<u64> = const { Cell::new(0) };
}

/// Number of values clamped to ±65504 on this thread since the last reset.
pub fn clamp_count() -> u64 {
    CLAMPED.with(|c| c.get())
}

pub fn reset_clamp_count() {
    CLAMPED.with(|c| c.set(0));
}

/// Nearest binary16 value (ties to even), widened back to `f64`. Finite
/// values beyond the binary16 range are clamped to ±65504 and counted.
#[inline]
pub fn round_f16(x: f64) -> f64 {
    let max = f16::MAX.to_f64();
    if x.is_finite() && x.abs() > max {
        CLAMPED.with(|c| c.set(c.get() + 1));
        log::debug!("fp16 round-trip clamped {x}");
        return max.copysign(x);
    }
    f16::from_f64(x).to_f64()
}

pub fn roundtrip_slice(xs: &mut [f64]) {
    for x in xs {
        *x = round_f16(*x);
    }
}

/// Values that can pass through binary16 storage.
pub trait Fp16Roundtrip: Sized {
    fn fp16_roundtrip(&self) -> Self;
}

impl Fp16Roundtrip for Vector {
    fn fp16_roundtrip(&self) -> Self {
        let mut v = self.clone();
        roundtrip_slice(v.as_mut_slice());
        v
    }
}

impl Fp16Roundtrip for Matrix {
    fn fp16_roundtrip(&self) -> Self {
        let mut m = self.clone();
        roundtrip_slice(m.as_mut_slice());
        m
    }
}

pub fn fp16_roundtrip<T: Fp16Roundtrip>(x: &T) -> T {
    x.fp16_roundtrip()
}
