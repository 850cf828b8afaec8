use crate::diffcore::Real;
use crate::error::{Error, Result};

use super::Matrix;

/// `A = Q R` with `Q` orthonormal and `R` upper triangular with a nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

/// Householder QR of a square matrix.
///
/// Reflections are skipped for columns that are already triangular, and any
/// negative diagonal entry of `R` is flipped by negating the row of `R` and the
/// matching column of `Q`, so `log R[j, j]` is always the log of a magnitude.
pub fn qr<T: Real>(a: &Matrix<T>) -> Result<QrFactors<T>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::Dimension {
            what: "qr expects a square matrix (columns)",
            expected: n,
            got: a.cols(),
        });
    }
    if let Some((r, c)) = a.first_non_finite() {
        return Err(Error::domain(format!("qr input entry ({r}, {c}) is not finite")));
    }

    let mut r = a.clone();
    let mut q = Matrix::<T>::identity(n);
    let mut v = vec![T::zero(); n];

    for k in 0..n.saturating_sub(1) {
        let below: f64 = (k + 1..n).map(|i| r[(i, k)].value().powi(2)).sum();
        if below == 0.0 {
            continue;
        }
        let mut norm2 = T::zero();
        for i in k..n {
            norm2 += r[(i, k)] * r[(i, k)];
        }
        let norm = norm2.sqrt();
        let alpha = if r[(k, k)].value() >= 0.0 { -norm } else { norm };

        for i in k..n {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let mut vnorm2 = T::zero();
        for &vi in &v[k..n] {
            vnorm2 += vi * vi;
        }
        let scale = T::cst(2.0) / vnorm2;

        // R <- H R on the trailing block.
        for c in k + 1..n {
            let mut dot = T::zero();
            for i in k..n {
                dot += v[i] * r[(i, c)];
            }
            let f = dot * scale;
            for i in k..n {
                let updated = r[(i, c)] - f * v[i];
                r[(i, c)] = updated;
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = T::zero();
        }

        // Q <- Q H.
        for row in 0..n {
            let mut dot = T::zero();
            for i in k..n {
                dot += q[(row, i)] * v[i];
            }
            let f = dot * scale;
            for i in k..n {
                let updated = q[(row, i)] - f * v[i];
                q[(row, i)] = updated;
            }
        }
    }

    for j in 0..n {
        if r[(j, j)].value() < 0.0 {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            for row in 0..n {
                q[(row, j)] = -q[(row, j)];
            }
        }
    }

    Ok(QrFactors { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_fixed() {
        let f = qr(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(f.q, Matrix::identity(3));
        assert_eq!(f.r, Matrix::identity(3));
    }

    #[test]
    fn sign_convention_on_diagonal() {
        let a = Matrix::from_diag(&[3.0, -2.0]);
        let f = qr(&a).unwrap();
        assert_eq!(f.r, Matrix::from_diag(&[3.0, 2.0]));
        assert_eq!(f.q, Matrix::from_diag(&[1.0, -1.0]));
    }

    #[test]
    fn rejects_nan_and_rectangular() {
        let a = Matrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]);
        assert!(matches!(qr(&a), Err(Error::NumericalDomain(_))));
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(qr(&b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn reconstructs_dense_matrix() {
        let a = Matrix::from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![4.0, 3.0, -2.0],
            vec![-1.0, 0.25, 7.0],
        ]);
        let f = qr(&a).unwrap();
        assert!(f.q.matmul(&f.r).sub(&a).max_abs() < 1e-14);
        assert!(f.q.transpose().matmul(&f.q).sub(&Matrix::identity(3)).max_abs() < 1e-15);
        for i in 0..3 {
            assert!(f.r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }
}
