//! Scalar abstraction used by every numerical kernel.
//!
//! All geometry, ray and beam code is written against [`Real`], which is
//! implemented for `f32`, `f64` and for the second-order Taylor jet
//! [`Jet`]. Evaluating a kernel on jets yields exact first and second
//! derivatives along one direction (time or one spatial axis), which is how
//! the residual decomposition and the analytic `∂_t u` are obtained.

use std::fmt::{self, Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{FromPrimitive, Num, NumAssign, One, ToPrimitive, Zero};

/// Real scalar field element.
pub trait Real:
    Copy
    + Debug
    + Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Num
    + NumAssign
    + Neg<Output = Self>
    + FromPrimitive
    + ToPrimitive
{
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn is_finite(self) -> bool;

    /// Lossy literal conversion.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Leading (value) part as `f64`.
    #[inline]
    fn val(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

macro_rules! impl_real_float {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_real_float!(f32);
impl_real_float!(f64);

/// Truncated Taylor series `v + d1·s + d2·s²/2` in one scalar direction `s`.
///
/// `d1` and `d2` hold the first and second derivatives. Comparisons look at
/// the value part only, so branch decisions in generic code follow the
/// underlying point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Real> Jet<T> {
    #[inline]
    pub fn new(v: T, d1: T, d2: T) -> Self {
        Jet { v, d1, d2 }
    }

    #[inline]
    pub fn constant(v: T) -> Self {
        Jet { v, d1: T::zero(), d2: T::zero() }
    }

    /// The independent variable itself, seeded at `v`.
    #[inline]
    pub fn variable(v: T) -> Self {
        Jet { v, d1: T::one(), d2: T::zero() }
    }

    /// Composition with a scalar function given its value and first two derivatives at `v`.
    #[inline]
    fn chain(self, f0: T, f1: T, f2: T) -> Self {
        Jet { v: f0, d1: f1 * self.d1, d2: f1 * self.d2 + f2 * self.d1 * self.d1 }
    }

    #[inline]
    fn recip(self) -> Self {
        let r = T::one() / self.v;
        self.chain(r, -r * r, (T::one() + T::one()) * r * r * r)
    }
}

impl<T: Real> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v
    }
}

impl<T: Real> PartialOrd for Jet<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl<T: Real> Display for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.v, self.d1, self.d2)
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Jet { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let two = T::one() + T::one();
        Jet {
            v: self.v * o.v,
            d1: self.v * o.d1 + self.d1 * o.v,
            d2: self.v * o.d2 + two * self.d1 * o.d1 + self.d2 * o.v,
        }
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Real> Rem for Jet<T> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        let r = self.v % o.v;
        let q = (self.v - r) / o.v;
        Jet { v: r, d1: self.d1 - q * o.d1, d2: self.d2 - q * o.d2 }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Jet { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

macro_rules! jet_assign {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Real> $tr for Jet<T> {
            #[inline]
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    };
}

jet_assign!(AddAssign, add_assign, +);
jet_assign!(SubAssign, sub_assign, -);
jet_assign!(MulAssign, mul_assign, *);
jet_assign!(DivAssign, div_assign, /);
jet_assign!(RemAssign, rem_assign, %);

impl<T: Real> Zero for Jet<T> {
    fn zero() -> Self {
        Jet::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.v.is_zero() && self.d1.is_zero() && self.d2.is_zero()
    }
}

impl<T: Real> One for Jet<T> {
    fn one() -> Self {
        Jet::constant(T::one())
    }
}

impl<T: Real> Num for Jet<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Jet::constant)
    }
}

impl<T: Real> FromPrimitive for Jet<T> {
    fn from_i64(n: i64) -> Option<Self> {
        T::from_i64(n).map(Jet::constant)
    }
    fn from_u64(n: u64) -> Option<Self> {
        T::from_u64(n).map(Jet::constant)
    }
    fn from_f64(n: f64) -> Option<Self> {
        T::from_f64(n).map(Jet::constant)
    }
}

impl<T: Real> ToPrimitive for Jet<T> {
    fn to_i64(&self) -> Option<i64> {
        self.v.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.v.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.v.to_f64()
    }
}

impl<T: Real> Real for Jet<T> {
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let two = T::one() + T::one();
        let four = two * two;
        self.chain(s, T::one() / (two * s), -T::one() / (four * s * s * s))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let r = T::one() / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }
    fn abs(self) -> Self {
        if self.v < T::zero() {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Jet::one(),
            1 => self,
            _ => {
                let nf = T::from_i32(n).expect("small integer");
                let pm1 = self.v.powi(n - 1);
                let pm2 = self.v.powi(n - 2);
                self.chain(pm1 * self.v, nf * pm1, nf * (nf - T::one()) * pm2)
            }
        }
    }
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

/// Complex exponential built from [`Real`] operations.
#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// Complex modulus.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

#[inline]
pub fn cfinite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Splits a complex jet into value, first and second derivative.
#[inline]
pub fn split_jet<T: Real>(z: Complex<Jet<T>>) -> [Complex<T>; 3] {
    [
        Complex::new(z.re.v, z.im.v),
        Complex::new(z.re.d1, z.im.d1),
        Complex::new(z.re.d2, z.im.d2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_matches_closed_form_derivatives() {
        // f(s) = sin(s)·exp(s)/sqrt(1 + s²) at s = 0.7
        let s = Jet::variable(0.7_f64);
        let f = s.sin() * s.exp() / (Jet::one() + s * s).sqrt();
        let fd = |x: f64| x.sin() * x.exp() / (1.0 + x * x).sqrt();
        let h = 1e-4;
        let d1 = (fd(0.7 + h) - fd(0.7 - h)) / (2.0 * h);
        let d2 = (fd(0.7 + h) - 2.0 * fd(0.7) + fd(0.7 - h)) / (h * h);
        assert!((f.v - fd(0.7)).abs() < 1e-15);
        assert!((f.d1 - d1).abs() < 1e-8);
        assert!((f.d2 - d2).abs() < 1e-6);
    }

    #[test]
    fn jet_powi_and_ln() {
        let s = Jet::variable(1.3_f64);
        let p = s.powi(3);
        assert!((p.d1 - 3.0 * 1.3 * 1.3).abs() < 1e-12);
        assert!((p.d2 - 6.0 * 1.3).abs() < 1e-12);
        let l = s.ln();
        assert!((l.d2 + 1.0 / (1.3 * 1.3)).abs() < 1e-12);
    }

    #[test]
    fn complex_jet_exponential() {
        // exp(i a s) has derivatives i a exp, -a² exp.
        let a = 3.0;
        let s = Jet::variable(0.2_f64);
        let z = cexp(Complex::new(Jet::zero(), s * Jet::constant(a)));
        let [v, d1, d2] = split_jet(z);
        let e = Complex::new(0.0, a * 0.2).exp();
        assert!((v - e).norm() < 1e-14);
        assert!((d1 - Complex::new(0.0, a) * e).norm() < 1e-13);
        assert!((d2 + a * a * e).norm() < 1e-12);
    }
}
