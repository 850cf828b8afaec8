//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy of `A` are rotated pairwise until mutually
//! orthogonal; the column norms are then the singular values. The method keeps
//! high relative accuracy for tiny singular values, which bidiagonalisation
//! does not.

use crate::diffcore::Real;
use crate::error::{Error, Result};

use super::Matrix;

pub const MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-15;

/// Singular-value floor applied before taking logarithms.
pub const DEFAULT_SV_FLOOR: f64 = 1e-300;

/// Full SVD `A = U diag(sigma) Vᵀ`, `sigma` descending.
///
/// Sign convention: the largest-magnitude entry of each column of `U` is
/// positive (first such entry on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors<T> {
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    pub v: Matrix<T>,
}

impl SvdFactors<f64> {
    /// `U Σ Vᵀ`, with Σ shaped `rows(U) x rows(V)`.
    pub fn reconstruct(&self) -> Matrix<f64> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut us = Matrix::zeros(m, n);
        for r in 0..m {
            for (k, &s) in self.sigma.iter().enumerate() {
                us[(r, k)] = self.u[(r, k)] * s;
            }
        }
        us.matmul(&self.v.transpose())
    }
}

pub fn svd<T: Real>(a: &Matrix<T>) -> Result<SvdFactors<T>> {
    if let Some((r, c)) = a.first_non_finite() {
        return Err(Error::domain(format!("svd input entry ({r}, {c}) is not finite")));
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose())?;
        let mut f = SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
        normalize_signs(&mut f);
        return Ok(f);
    }
    let mut f = svd_tall(a)?;
    normalize_signs(&mut f);
    Ok(f)
}

/// `log(max(sigma_j, floor))`, descending.
pub fn log_singular_values(a: &Matrix<f64>, floor: f64) -> Result<Vec<f64>> {
    if !(floor > 0.0) {
        return Err(Error::domain(format!("singular-value floor must be positive, got {floor}")));
    }
    Ok(svd(a)?.sigma.iter().map(|&s| s.max(floor).ln()).collect())
}

/// Singular values only, descending; skips assembling `U`.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    if let Some((r, c)) = a.first_non_finite() {
        return Err(Error::domain(format!("svd input entry ({r}, {c}) is not finite")));
    }
    let work = if a.rows() < a.cols() { a.transpose() } else { a.clone() };
    let (w, _) = jacobi_sweeps(work, false)?;
    let mut sigma = column_norms(&w);
    sigma.sort_by(|x, y| y.value().total_cmp(&x.value()));
    Ok(sigma)
}

fn column_norms<T: Real>(w: &Matrix<T>) -> Vec<T> {
    (0..w.cols())
        .map(|j| {
            let mut s = T::zero();
            for i in 0..w.rows() {
                s += w[(i, j)] * w[(i, j)];
            }
            if s.value() == 0.0 {
                T::zero()
            } else {
                s.sqrt()
            }
        })
        .collect()
}

/// Orthogonalise the columns of `w` in place; optionally accumulate `V`.
fn jacobi_sweeps<T: Real>(mut w: Matrix<T>, with_v: bool) -> Result<(Matrix<T>, Option<Matrix<T>>)> {
    let (m, n) = (w.rows(), w.cols());
    let mut v = with_v.then(|| Matrix::<T>::identity(n));
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        residual = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                let (a, b, g) = (alpha.value(), beta.value(), gamma.value());
                if g == 0.0 || a == 0.0 || b == 0.0 {
                    continue;
                }
                let cosine = g.abs() / (a.sqrt() * b.sqrt());
                if cosine <= ORTHO_TOL {
                    continue;
                }
                residual = f64::max(residual, cosine);
                rotated = true;

                let zeta = (beta - alpha) / (gamma * 2.0);
                let t = if zeta.value() >= 0.0 {
                    T::one() / (zeta + (zeta * zeta + 1.0).sqrt())
                } else {
                    -T::one() / ((zeta * zeta + 1.0).sqrt() - zeta)
                };
                let c = T::one() / (t * t + 1.0).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                if let Some(v) = v.as_mut() {
                    for i in 0..n {
                        let (vp, vq) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::Convergence {
        sweeps: MAX_SWEEPS,
        residual,
    })
}

fn svd_tall<T: Real>(a: &Matrix<T>) -> Result<SvdFactors<T>> {
    let (m, n) = (a.rows(), a.cols());
    let (w, v) = jacobi_sweeps(a.clone(), true)?;
    let v = v.expect("V requested");
    let norms = column_norms(&w);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].value().total_cmp(&norms[x].value()));

    let mut u = Matrix::<T>::zeros(m, m);
    let mut v_sorted = Matrix::<T>::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut filled = vec![false; m];
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        for i in 0..n {
            v_sorted[(i, k)] = v[(i, j)];
        }
        if s.value() > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)] / s;
            }
            filled[k] = true;
        }
    }
    complete_basis(&mut u, &filled);
    Ok(SvdFactors {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Fill the unset columns of `u` with an orthonormal completion built from
/// Gram-Schmidt against the standard basis.
fn complete_basis<T: Real>(u: &mut Matrix<T>, filled: &[bool]) {
    let m = u.rows();
    let mut have: Vec<usize> = (0..m).filter(|&k| filled[k]).collect();
    for k in (0..m).filter(|&k| !filled[k]) {
        let mut best: Option<(f64, Vec<T>)> = None;
        for e in 0..m {
            let mut cand = vec![T::zero(); m];
            cand[e] = T::one();
            for _ in 0..2 {
                for &h in &have {
                    let mut dot = T::zero();
                    for i in 0..m {
                        dot += u[(i, h)] * cand[i];
                    }
                    for i in 0..m {
                        cand[i] -= dot * u[(i, h)];
                    }
                }
            }
            let norm = cand.iter().map(|c| c.value().powi(2)).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
        }
        let (norm, cand) = best.expect("m > 0");
        for i in 0..m {
            u[(i, k)] = cand[i] / norm;
        }
        have.push(k);
    }
}

fn normalize_signs<T: Real>(f: &mut SvdFactors<T>) {
    let m = f.u.rows();
    for k in 0..m {
        let mut idx = 0;
        let mut best = -1.0;
        for i in 0..m {
            let mag = f.u[(i, k)].value().abs();
            if mag > best {
                best = mag;
                idx = i;
            }
        }
        if f.u[(idx, k)].value() < 0.0 {
            for i in 0..m {
                f.u[(i, k)] = -f.u[(i, k)];
            }
            if k < f.v.cols() {
                for i in 0..f.v.rows() {
                    f.v[(i, k)] = -f.v[(i, k)];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_values() {
        let f = svd(&Matrix::from_diag(&[1.0, 5.0])).unwrap();
        assert_eq!(f.sigma, vec![5.0, 1.0]);
        assert!(f.reconstruct().sub(&Matrix::from_diag(&[1.0, 5.0])).max_abs() < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let f = svd(&Matrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(f.sigma, vec![0.0, 0.0]);
        let utu = f.u.transpose().matmul(&f.u);
        assert!(utu.sub(&Matrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn tiny_singular_value_is_exact() {
        let eps = 1e-10;
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-eps, 0.0]]);
        let f = svd(&a).unwrap();
        assert!((f.sigma[0] - 1.0).abs() < 1e-15);
        assert!((f.sigma[1] - eps).abs() < 1e-15);
    }

    #[test]
    fn wide_matrix_and_sign_convention() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.5, 1.0]]);
        let f = svd(&a).unwrap();
        assert_eq!((f.u.rows(), f.v.rows()), (2, 3));
        assert!(f.reconstruct().sub(&a).max_abs() < 1e-13);
        for k in 0..2 {
            let col = f.u.col(k);
            let big = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn log_floor() {
        let e = std::f64::consts::E;
        let l = log_singular_values(&Matrix::from_diag(&[e, e]), DEFAULT_SV_FLOOR).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-15 && (l[1] - 1.0).abs() < 1e-15);
        let z = log_singular_values(&Matrix::zeros(2, 2), 1e-300).unwrap();
        assert_eq!(z, vec![1e-300f64.ln(); 2]);
        assert!((z[0] - (-690.7755278982137)).abs() < 1e-10);
        assert!(log_singular_values(&Matrix::zeros(2, 2), 0.0).is_err());
    }

    #[test]
    fn singular_values_only_matches_full() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0], vec![0.0, -1.0]]);
        assert_eq!(singular_values(&a).unwrap(), svd(&a).unwrap().sigma);
    }
}
