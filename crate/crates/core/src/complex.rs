use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A complex number stored as a (real, imaginary) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct Complex<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Complex<T> {
    pub const ZERO: Self = Complex { re: T::ZERO, im: T::ZERO };
    pub const ONE: Self = Complex { re: T::ONE, im: T::ZERO };

    #[inline(always)]
    pub const fn new(re: T, im: T) -> Self {
        Complex { re, im }
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        Complex::new(T::from_f64(re), T::from_f64(im))
    }

    /// `self + a * b` using four fused multiply-adds.
    #[inline(always)]
    pub fn fma(self, a: Self, b: Self) -> Self {
        let re = a.re.mul_add(b.re, self.re);
        let re = (-a.im).mul_add(b.im, re);
        let im = a.re.mul_add(b.im, self.im);
        let im = a.im.mul_add(b.re, im);
        Complex { re, im }
    }
}

impl<T: Scalar> Add for Complex<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Complex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<T: Scalar> AddAssign for Complex<T> {
    #[inline(always)]
    fn add_assign(&mut self, rhs: Self) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl<T: Scalar> Sub for Complex<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Complex::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<T: Scalar> Mul for Complex<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        Complex::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn multiply_by_one_is_identity() {
        let z = Complex::<f64>::new(0.25, -3.5);
        assert_eq!(z * Complex::ONE, z);
        assert_eq!(Complex::ONE * z, z);
    }

    #[test]
    fn product_components() {
        let a = Complex::<f64>::new(1.0, 2.0);
        let b = Complex::<f64>::new(3.0, -4.0);
        assert_eq!(a * b, Complex::new(11.0, 2.0));
    }

    proptest! {
        #[test]
        fn multiplication_commutes(ar in -1e3f64..1e3, ai in -1e3f64..1e3, br in -1e3f64..1e3, bi in -1e3f64..1e3) {
            let a = Complex::new(ar, ai);
            let b = Complex::new(br, bi);
            prop_assert_eq!(a * b, b * a);
        }

        #[test]
        fn fma_matches_mul_add(ar in -1.0f64..1.0, ai in -1.0f64..1.0, br in -1.0f64..1.0, bi in -1.0f64..1.0) {
            let a = Complex::new(ar, ai);
            let b = Complex::new(br, bi);
            let acc = Complex::new(0.5, -0.5);
            let fused = acc.fma(a, b);
            let plain = acc + a * b;
            prop_assert!((fused.re - plain.re).abs() < 1e-14);
            prop_assert!((fused.im - plain.im).abs() < 1e-14);
        }
    }
}
