use rayon::prelude::*;

use super::JacobianMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Base relative step for outer-loop gradients.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Per-component step `h (1 + |x|)`.
#[inline]
pub fn fd_step(h: f64, x: f64) -> f64 {
    h * (1.0 + x.abs())
}

/// Central-difference Jacobian with absolute step `h`:
/// column `j` is `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn finite_diff_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<JacobianMatrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("finite-difference step must be positive, got {h}")));
    }
    let n = x.len();
    let mut probe = x.to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        if plus.len() != minus.len() {
            return Err(Error::Dimension {
                what: "finite-difference output length",
                expected: plus.len(),
                got: minus.len(),
            });
        }
        let col: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "finite-difference column {j} has non-finite entry {i}"
            )));
        }
        cols.push(col);
    }
    let m = cols.first().map_or(0, Vec::len);
    let mut entries = Matrix::zeros(m, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(JacobianMatrix {
        entries,
        base_point: x.to_vec(),
    })
}

/// Central-difference gradient of a scalar loss with per-component step
/// `h (1 + |θ_j|)`. Probes run concurrently; the result does not depend on
/// the worker count.
pub fn grad_scalar_fd<F>(loss: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("finite-difference step must be positive, got {h}")));
    }
    (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let step = fd_step(h, theta[j]);
            let mut probe = theta.to_vec();
            probe[j] = theta[j] + step;
            let plus = loss(&probe);
            probe[j] = theta[j] - step;
            let minus = loss(&probe);
            for (sign, v) in [("+", plus), ("-", minus)] {
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "loss is not finite at probe θ[{j}] {sign} {step:e} (value {v})"
                    )));
                }
            }
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}
