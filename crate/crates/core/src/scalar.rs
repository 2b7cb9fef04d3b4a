//! Scalar abstraction shared by the plain `f64` forward model and its
//! forward-mode dual-number twin used for Jacobians.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    #[inline]
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    #[inline]
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

/// Dual number carrying a dense gradient with respect to a fixed set of
/// variables. An empty `eps` stands for a constant (all-zero gradient).
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: Vec<f64>,
}

impl Dual {
    pub fn variable(re: f64, index: usize, n_vars: usize) -> Self {
        let mut eps = vec![0.0; n_vars];
        eps[index] = 1.0;
        Dual { re, eps }
    }

    /// Derivative with respect to variable `i` (zero for constants).
    pub fn derivative(&self, i: usize) -> f64 {
        self.eps.get(i).copied().unwrap_or(0.0)
    }

    fn chain(&self, value: f64, slope: f64) -> Dual {
        Dual {
            re: value,
            eps: self.eps.iter().map(|d| d * slope).collect(),
        }
    }
}

// a*x + b*y over gradients of possibly different (empty) lengths
fn combine(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => x.iter().map(|v| a * v).collect(),
        (true, false) => y.iter().map(|v| b * v).collect(),
        (false, false) => x.iter().zip(y).map(|(u, v)| a * u + b * v).collect(),
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        if rhs.eps.is_empty() {
            return Dual {
                re: self.re + rhs.re,
                eps: self.eps,
            };
        }
        if self.eps.is_empty() {
            return Dual {
                re: self.re + rhs.re,
                eps: rhs.eps,
            };
        }
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(&rhs.eps) {
            *e += r;
        }
        Dual {
            re: self.re + rhs.re,
            eps,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            re: self.re - rhs.re,
            eps: combine(1.0, &self.eps, -1.0, &rhs.eps),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            re: self.re * rhs.re,
            eps: combine(rhs.re, &self.eps, self.re, &rhs.eps),
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        Dual {
            re,
            eps: combine(inv, &self.eps, -re * inv, &rhs.eps),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.chain(-self.re, -1.0)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, rhs: f64) -> Dual {
        self.re += rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(mut self, rhs: f64) -> Dual {
        self.re *= rhs;
        self.eps.iter_mut().for_each(|e| *e *= rhs);
        self
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual {
            re: v,
            eps: Vec::new(),
        }
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0, 0, 2);
        let y = Dual::variable(-2.0, 1, 2);
        let f = x.clone() * y.clone() + x.clone().sin();
        assert_eq!(f.re, -6.0 + 3.0f64.sin());
        assert!((f.derivative(0) - (-2.0 + 3.0f64.cos())).abs() < 1e-15);
        assert_eq!(f.derivative(1), 3.0);
    }

    #[test]
    fn quotient_and_sqrt() {
        let x = Dual::variable(4.0, 0, 1);
        let f = Dual::constant(1.0) / x.sqrt();
        assert_eq!(f.re, 0.5);
        assert!((f.derivative(0) + 0.5 * 4.0f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn constants_stay_sparse() {
        let c = Dual::constant(2.0) * Dual::constant(5.0) + 1.0;
        assert!(c.eps.is_empty());
        assert_eq!(c.derivative(3), 0.0);
    }
}
