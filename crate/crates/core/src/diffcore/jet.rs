//! Forward-mode jets: a primal value carrying `N` directional tangents.
//!
//! `Jet<T, N>` is generic over its scalar so jets nest: `Jet<Jet<f64, P>, D>`
//! differentiates a state Jacobian with respect to `P` parameters.

use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::Real;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T, const N: usize> {
    pub re: T,
    pub eps: [T; N],
}

impl<T: Real, const N: usize> Jet<T, N> {
    #[inline]
    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: [T::zero(); N],
        }
    }

    /// Seed direction `k` with a unit tangent.
    #[inline]
    pub fn variable(re: T, k: usize) -> Self {
        let mut eps = [T::zero(); N];
        eps[k] = T::one();
        Self { re, eps }
    }

    /// Apply a scalar function given its value and derivative at `re`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= df;
        }
        Self { re: f, eps }
    }
}

impl<T: Real, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a += b;
        }
        self
    }
}

impl<T: Real, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a -= b;
        }
        self
    }
}

impl<T: Real, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (a, b) in eps.iter_mut().zip(rhs.eps) {
            *a = *a * rhs.re + self.re * b;
        }
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<T: Real, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        let mut eps = self.eps;
        for (a, b) in eps.iter_mut().zip(rhs.eps) {
            *a = (*a - re * b) / rhs.re;
        }
        Self { re, eps }
    }
}

impl<T: Real, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.re = -self.re;
        for a in self.eps.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<T: Real, const N: usize> Add<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re = self.re + rhs;
        self
    }
}

impl<T: Real, const N: usize> Sub<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re = self.re - rhs;
        self
    }
}

impl<T: Real, const N: usize> Mul<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.re = self.re * rhs;
        for a in self.eps.iter_mut() {
            *a = *a * rhs;
        }
        self
    }
}

impl<T: Real, const N: usize> Div<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(mut self, rhs: f64) -> Self {
        self.re = self.re / rhs;
        for a in self.eps.iter_mut() {
            *a = *a / rhs;
        }
        self
    }
}

macro_rules! assign_ops {
    ($($trait:ident $method:ident $op:tt),*) => {$(
        impl<T: Real, const N: usize> $trait for Jet<T, N> {
            #[inline]
            fn $method(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    )*};
}

assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl<T: Real, const N: usize> Real for Jet<T, N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(T::cst(v))
    }

    #[inline]
    fn value(&self) -> f64 {
        self.re.value()
    }

    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c)
    }

    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s)
    }

    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.re.sin_cos();
        (self.chain(s, c), self.chain(c, -s))
    }

    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), T::one() / self.re)
    }

    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, T::one() / (s * 2.0))
    }

    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, T::one() - t * t)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1) * f64::from(n)),
        }
    }

    #[inline]
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.eps.iter().all(Real::all_finite)
    }
}

/// A point together with a bundle of `k` tangent directions.
///
/// `tangents` is `d x k`: row `i` holds the derivatives of component `i`
/// along each seeded direction. Seeding the identity (`k = d`) makes the
/// tangent block the full Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct JetVector {
    pub value: Vec<f64>,
    pub tangents: Matrix<f64>,
}

impl JetVector {
    /// Seed `value` with the first `k` unit directions on width-`N` jets.
    pub fn seed<const N: usize>(value: &[f64], k: usize) -> Vec<Jet<f64, N>> {
        debug_assert!(k <= N);
        value
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i < k {
                    Jet::variable(v, i)
                } else {
                    Jet::constant(v)
                }
            })
            .collect()
    }

    /// Collect jets back into values plus the first `k` tangent columns.
    pub fn from_jets<const N: usize>(jets: &[Jet<f64, N>], k: usize) -> Self {
        let d = jets.len();
        let mut tangents = Matrix::zeros(d, k);
        for (i, j) in jets.iter().enumerate() {
            for c in 0..k {
                tangents[(i, c)] = j.eps[c];
            }
        }
        Self {
            value: jets.iter().map(|j| j.re).collect(),
            tangents,
        }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn directions(&self) -> usize {
        self.tangents.cols()
    }
}
