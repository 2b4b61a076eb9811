//! Forward-mode dual numbers.
//!
//! `Dual<f64>` carries one directional derivative; `Dual<Dual<f64>>` carries
//! two, and its `eps.eps` part is the mixed second derivative along both
//! seed directions.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic needed by the expression evaluator.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Real (primal) part.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// All components finite.
    fn is_finite(&self) -> bool;

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::constant(1.0);
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            n >>= 1;
            if n > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// Independent variable with derivative seed 1.
    pub fn variable(re: T) -> Self {
        Dual {
            re,
            eps: T::constant(1.0),
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(v: f64) -> Self {
        Dual::new(T::constant(v), T::constant(0.0))
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (T::constant(2.0) * s))
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D2 = Dual<Dual<f64>>;

    fn seed(x: f64, outer: f64, inner: f64) -> D2 {
        Dual::new(Dual::new(x, inner), Dual::new(outer, 0.0))
    }

    #[test]
    fn second_derivatives_of_elementary_functions() {
        let x = 0.7;
        let v = seed(x, 1.0, 1.0);
        let cases: [(D2, f64, f64, f64); 5] = [
            (v.sqrt(), x.sqrt(), 0.5 / x.sqrt(), -0.25 * x.powf(-1.5)),
            (v.sin(), x.sin(), x.cos(), -x.sin()),
            (v.cos(), x.cos(), -x.sin(), -x.cos()),
            (v.exp(), x.exp(), x.exp(), x.exp()),
            (v.ln(), x.ln(), 1.0 / x, -1.0 / (x * x)),
        ];
        for (r, f0, f1, f2) in cases {
            assert!((r.re.re - f0).abs() < 1e-15);
            assert!((r.re.eps - f1).abs() < 1e-14);
            assert!((r.eps.re - f1).abs() < 1e-14);
            assert!((r.eps.eps - f2).abs() < 1e-13);
        }
    }

    #[test]
    fn powi_matches_repeated_product() {
        let v = seed(1.3, 1.0, 1.0);
        let r = v.powi(5);
        assert!((r.re.re - 1.3f64.powi(5)).abs() < 1e-12);
        assert!((r.eps.re - 5.0 * 1.3f64.powi(4)).abs() < 1e-12);
        assert!((r.eps.eps - 20.0 * 1.3f64.powi(3)).abs() < 1e-12);
        assert_eq!(v.powi(0).re.re, 1.0);
        assert_eq!(v.powi(0).eps.eps, 0.0);
    }

    #[test]
    fn quotient_rule() {
        // f = x / (1 + x), f'' = -2 / (1 + x)^3
        let x = 0.4;
        let v = seed(x, 1.0, 1.0);
        let r = v / (D2::constant(1.0) + v);
        assert!((r.eps.eps + 2.0 / (1.0 + x).powi(3)).abs() < 1e-14);
    }
}
