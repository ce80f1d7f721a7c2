//! Scalar backends: exact Gaussian rationals and mirrored complex floats.
//!
//! The exact backend makes every residual assertion literal (zero means the
//! zero element of ℚ\[i\]); the float backend runs the same code paths with
//! `f64` complex arithmetic for speed.

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Coefficient field for all symbolic data.
///
/// Implementations must form a field; `try_inv` returns `None` exactly on
/// zero (exact backend) or on numeric zero (float backend).
pub trait Scalar: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_gaussian(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn try_inv(&self) -> Option<Self>;
    fn to_c64(&self) -> Complex64;
    /// Magnitude used for pivot selection and residual reporting.
    fn pivot_size(&self) -> f64;
    /// True when arithmetic is exact (no rounding).
    fn exact() -> bool;
}

/// Gaussian rational: a pair of arbitrary-precision rationals re + im·i.
#[derive(Clone, PartialEq, Eq)]
pub struct Exact {
    pub re: BigRational,
    pub im: BigRational,
}

impl Exact {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Exact { re, im }
    }

    fn ratio(num: i64, den: i64) -> BigRational {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn i() -> Self {
        Exact::new(BigRational::zero(), BigRational::one())
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else if self.im.is_negative() {
            write!(f, "{}{}i", self.re, self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl Scalar for Exact {
    fn zero() -> Self {
        Exact::new(BigRational::zero(), BigRational::zero())
    }

    fn one() -> Self {
        Exact::new(BigRational::one(), BigRational::zero())
    }

    fn from_i64(n: i64) -> Self {
        Exact::new(Self::ratio(n, 1), BigRational::zero())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Exact::new(Self::ratio(num, den), BigRational::zero())
    }

    fn from_gaussian(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        Exact::new(Self::ratio(re_num, re_den), Self::ratio(im_num, im_den))
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add(&self, other: &Self) -> Self {
        Exact::new(&self.re + &other.re, &self.im + &other.im)
    }

    fn sub(&self, other: &Self) -> Self {
        Exact::new(&self.re - &other.re, &self.im - &other.im)
    }

    fn mul(&self, other: &Self) -> Self {
        Exact::new(
            &self.re * &other.re - &self.im * &other.im,
            &self.re * &other.im + &self.im * &other.re,
        )
    }

    fn neg(&self) -> Self {
        Exact::new(-self.re.clone(), -self.im.clone())
    }

    fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(Exact::new(&self.re / &norm, -&self.im / &norm))
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    fn pivot_size(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            // Any nonzero exact scalar is an equally good pivot.
            1.0
        }
    }

    fn exact() -> bool {
        true
    }
}

/// Complex `f64` mirror of the exact backend.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct F64c(pub Complex64);

impl fmt::Display for F64c {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Scalar for F64c {
    fn zero() -> Self {
        F64c(Complex64::new(0.0, 0.0))
    }

    fn one() -> Self {
        F64c(Complex64::new(1.0, 0.0))
    }

    fn from_i64(n: i64) -> Self {
        F64c(Complex64::new(n as f64, 0.0))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        F64c(Complex64::new(num as f64 / den as f64, 0.0))
    }

    fn from_gaussian(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        F64c(Complex64::new(
            re_num as f64 / re_den as f64,
            im_num as f64 / im_den as f64,
        ))
    }

    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }

    fn add(&self, other: &Self) -> Self {
        F64c(self.0 + other.0)
    }

    fn sub(&self, other: &Self) -> Self {
        F64c(self.0 - other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        F64c(self.0 * other.0)
    }

    fn neg(&self) -> Self {
        F64c(-self.0)
    }

    fn try_inv(&self) -> Option<Self> {
        if self.0.norm() == 0.0 {
            None
        } else {
            Some(F64c(self.0.inv()))
        }
    }

    fn to_c64(&self) -> Complex64 {
        self.0
    }

    fn pivot_size(&self) -> f64 {
        self.0.norm()
    }

    fn exact() -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_field_ops() {
        let a = Exact::from_gaussian(1, 2, -1, 3);
        let b = Exact::from_gaussian(2, 1, 5, 7);
        let prod = a.mul(&b);
        let back = prod.mul(&b.try_inv().unwrap());
        assert_eq!(back, a);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn exact_inverse_of_zero_is_none() {
        assert!(Exact::zero().try_inv().is_none());
    }

    #[test]
    fn float_mirrors_exact() {
        let a = Exact::from_gaussian(3, 4, 1, 2);
        let fa = F64c(a.to_c64());
        let inv = fa.try_inv().unwrap();
        let prod = fa.mul(&inv);
        assert!((prod.0 - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }
}
