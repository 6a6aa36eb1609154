//! Floating-point element types the kernels are generic over.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Storage precision of a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    /// Bytes per real scalar.
    pub fn scalar_bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "fp32" | "single" => Ok(Precision::F32),
            "f64" | "fp64" | "double" => Ok(Precision::F64),
            other => Err(Error::config(format!("unknown precision `{other}`"))),
        }
    }
}

/// A real scalar usable as the component type of the lattice math.
///
/// `Pad` is the filler that brings a `Site` to its fixed 320/640 byte size.
///
/// # Safety
///
/// The all-zero bit pattern must be a valid value of both `Self` and
/// `Self::Pad`: lattice storage hands out freshly mapped, zero-filled memory.
pub unsafe trait Scalar:
    Copy
    + Default
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    type Pad: Copy + Default + fmt::Debug + Send + Sync + 'static;

    const PRECISION: Precision;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `self * a + b`, fused when the target has hardware FMA.
    fn mul_add(self, a: Self, b: Self) -> Self;
}

unsafe impl Scalar for f32 {
    type Pad = [u32; 2];
    const PRECISION: Precision = Precision::F32;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn mul_add(self, a: Self, b: Self) -> Self {
        #[cfg(target_feature = "fma")]
        {
            f32::mul_add(self, a, b)
        }
        #[cfg(not(target_feature = "fma"))]
        {
            self * a + b
        }
    }
}

unsafe impl Scalar for f64 {
    type Pad = [u32; 10];
    const PRECISION: Precision = Precision::F64;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn mul_add(self, a: Self, b: Self) -> Self {
        #[cfg(target_feature = "fma")]
        {
            f64::mul_add(self, a, b)
        }
        #[cfg(not(target_feature = "fma"))]
        {
            self * a + b
        }
    }
}

static FLOPS: AtomicU64 = AtomicU64::new(0);
static COUNTING: Mutex<()> = Mutex::new(());

/// An `f64` that counts every arithmetic operation performed on it.
///
/// Same size and layout as `f64`, so lattices built on it have the fp64
/// byte sizes. Negation is a sign flip and is not counted; a fused
/// multiply-add counts as two operations.
#[derive(Clone, Copy, Default, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct CountedF64(pub f64);

impl fmt::Debug for CountedF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[inline(always)]
fn tally(n: u64) {
    FLOPS.fetch_add(n, Ordering::Relaxed);
}

impl Add for CountedF64 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        tally(1);
        CountedF64(self.0 + rhs.0)
    }
}

impl Sub for CountedF64 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        tally(1);
        CountedF64(self.0 - rhs.0)
    }
}

impl Mul for CountedF64 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        tally(1);
        CountedF64(self.0 * rhs.0)
    }
}

impl Neg for CountedF64 {
    type Output = Self;
    fn neg(self) -> Self {
        CountedF64(-self.0)
    }
}

impl AddAssign for CountedF64 {
    fn add_assign(&mut self, rhs: Self) {
        tally(1);
        self.0 += rhs.0;
    }
}

unsafe impl Scalar for CountedF64 {
    type Pad = [u32; 10];
    const PRECISION: Precision = Precision::F64;
    const ZERO: Self = CountedF64(0.0);
    const ONE: Self = CountedF64(1.0);

    fn from_f64(v: f64) -> Self {
        CountedF64(v)
    }

    fn to_f64(self) -> f64 {
        self.0
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        tally(2);
        CountedF64(self.0 * a.0 + b.0)
    }
}

/// Runs `f` with the operation counter zeroed and returns the number of
/// `CountedF64` operations it performed, across all threads it spawned.
///
/// Calls are serialized so concurrent measurements cannot interleave.
pub fn count_flops<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let _guard = COUNTING.lock().unwrap_or_else(|e| e.into_inner());
    FLOPS.store(0, Ordering::SeqCst);
    let out = f();
    (out, FLOPS.load(Ordering::SeqCst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_sees_each_op() {
        let (v, n) = count_flops(|| {
            let a = CountedF64(2.0);
            let b = CountedF64(3.0);
            let mut c = a * b - a;
            c += b;
            -c.mul_add(a, b)
        });
        assert_eq!(v.0, -(7.0 * 2.0 + 3.0));
        assert_eq!(n, 5);
    }

    #[test]
    fn precision_parses() {
        assert_eq!("fp32".parse::<Precision>().unwrap(), Precision::F32);
        assert_eq!("f64".parse::<Precision>().unwrap(), Precision::F64);
        assert!("f16".parse::<Precision>().is_err());
    }
}
