//! Benchmark maps with known spectra.

use crate::diffcore::Real;
use crate::linalg::Matrix;

/// `x' = A x` with `A` stored row-major in `theta`.
pub fn linear<T: Real>(x: &[T], theta: &[T]) -> Vec<T> {
    let d = x.len();
    (0..d)
        .map(|r| {
            let mut s = T::zero();
            for c in 0..d {
                s += theta[r * d + c] * x[c];
            }
            s
        })
        .collect()
}

pub fn linear_matrix(theta: &[f64], d: usize) -> Matrix<f64> {
    Matrix::from_row_major(d, d, theta.to_vec())
}

/// `x' = r x (1 - x)`.
pub fn logistic<T: Real>(x: &[T], theta: &[T]) -> Vec<T> {
    let r = theta[0];
    vec![r * x[0] * (T::one() - x[0])]
}

/// `(x, y) -> (1 - a x² + y, b x)`.
pub fn henon<T: Real>(x: &[T], theta: &[T]) -> Vec<T> {
    let (a, b) = (theta[0], theta[1]);
    vec![T::one() - a * x[0] * x[0] + x[1], b * x[0]]
}

/// One explicit-Euler step of `q̈ - mu (1 - q²) q̇ + q = 0`.
pub fn vanderpol<T: Real>(x: &[T], theta: &[T], dt: f64) -> Vec<T> {
    let mu = theta[0];
    let (q, v) = (x[0], x[1]);
    let acc = mu * (T::one() - q * q) * v - q;
    vec![q + v * dt, v + acc * dt]
}
