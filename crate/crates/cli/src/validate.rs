//! Self-checks of the numerical core: jets against differences, decomposition
//! residuals, and spectra with known values.

use lyra::diffcore::{finite_diff_jacobian, jacobian_state};
use lyra::dynsys::{SystemId, TransitionMap};
use lyra::linalg::{log_singular_values, qr, svd, Matrix, DEFAULT_SV_FLOOR};
use lyra::lyap::{rollout, spectrum, Estimator, EstimatorOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::{Check, ValidationReport};

fn random_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_row_major(m, n, (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// `Q₁ diag(σ) Q₂ᵀ` with `σ` log-spaced over `cond`.
fn conditioned(m: usize, n: usize, cond: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let q1 = qr(&random_matrix(m, m, rng)).expect("square").q;
    let q2 = qr(&random_matrix(n, n, rng)).expect("square").q;
    let k = m.min(n);
    let mut s = Matrix::zeros(m, n);
    for i in 0..k {
        let t = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
        s[(i, i)] = cond.powf(-t);
    }
    q1.matmul(&s).matmul(&q2.transpose())
}

fn orthogonality(q: &Matrix<f64>) -> f64 {
    q.transpose().matmul(q).sub(&Matrix::identity(q.cols())).norm_inf()
}

/// Worst relative gap between jet and central-difference Jacobians over
/// `samples` states drawn from the system's sample region.
pub fn jet_fd_gap(map: &TransitionMap, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let h = if map.system() == SystemId::Hopper1d { 1e-7 } else { 1e-6 };
    let (lo, hi) = map.sample_region();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(&a, &b)| rng.random_range(a..b)).collect();
        let gap = jacobian_state(map, &x, map.params())
            .and_then(|jet| {
                let fd = finite_diff_jacobian(|y| map.step(y), &x, h)?;
                Ok(jet.entries.sub(&fd.entries).norm_inf() / (1.0 + fd.entries.norm_inf()))
            })
            .unwrap_or(f64::INFINITY);
        worst = worst.max(gap);
    }
    worst
}

/// QR on square and SVD on rectangular matrices of sizes 1 to 8.
pub fn decomposition_checks(rng: &mut ChaCha8Rng, count: usize) -> [Check; 2] {
    let mut qr_res: f64 = 0.0;
    let mut svd_res: f64 = 0.0;
    for k in 0..count {
        let n = 1 + k % 8;
        let m = 1 + (k / 8) % 8;
        let cond = 10f64.powf(rng.random_range(0.0..8.0));
        let a = conditioned(n, n, cond, rng);
        qr_res = match qr(&a) {
            Ok(f) => qr_res.max(orthogonality(&f.q)).max(f.q.matmul(&f.r).sub(&a).norm_inf()),
            Err(_) => f64::INFINITY,
        };
        let b = conditioned(m, n, cond, rng);
        svd_res = match svd(&b) {
            Ok(f) => svd_res
                .max(orthogonality(&f.u))
                .max(orthogonality(&f.v))
                .max(f.reconstruct().sub(&b).norm_inf()),
            Err(_) => f64::INFINITY,
        };
    }
    [
        Check::at_most("qr residual (cond <= 1e8)", qr_res, 1e-10),
        Check::at_most("svd residual (cond <= 1e8)", svd_res, 1e-10),
    ]
}

fn spectrum_of(map: &TransitionMap, x0: &[f64], n: usize, est: Estimator) -> Option<Vec<f64>> {
    rollout(map, x0, n)
        .and_then(|t| spectrum(&t, est, EstimatorOptions::default()))
        .ok()
        .map(|s| s.exponents)
}

/// Runs every check. With `negative_control` the singular-value floor is
/// switched off on a zero matrix, which must be reported as a failure.
pub fn validation_suite(negative_control: bool, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    for system in SystemId::ALL {
        let map = TransitionMap::preset(system);
        checks.push(Check::at_most(format!("jet vs central difference: {system}"), jet_fd_gap(&map, &mut rng, 25), 1e-5));
    }
    checks.extend(decomposition_checks(&mut rng, 256));

    let logistic = TransitionMap::preset(SystemId::Logistic);
    let l = spectrum_of(&logistic, &[0.3], 1_000_000, Estimator::SvdLocal).map_or(f64::INFINITY, |s| s[0]);
    checks.push(Check::at_most("logistic r=4 |lambda - ln 2|", (l - std::f64::consts::LN_2).abs(), 1e-3));

    let henon = TransitionMap::preset(SystemId::Henon);
    let sum = spectrum_of(&henon, &[0.1, 0.1], 100_000, Estimator::QrPropagated)
        .map_or(f64::INFINITY, |s| s.iter().sum::<f64>());
    checks.push(Check::at_most("henon |sum lambda - ln 0.3|", (sum - 0.3f64.ln()).abs(), 1e-9));

    let diag = TransitionMap::linear(Matrix::from_diag(&[1.2, 0.9, 0.1])).expect("square");
    let gap = match (
        spectrum_of(&diag, &[1.0, 1.0, 1.0], 200, Estimator::SvdLocal),
        spectrum_of(&diag, &[1.0, 1.0, 1.0], 200, Estimator::QrPropagated),
    ) {
        (Some(a), Some(b)) => a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    checks.push(Check::at_most("svd_local vs qr_propagated, diagonal map", gap, 1e-12));

    let identity = TransitionMap::linear(Matrix::identity(2)).expect("square");
    let zero = spectrum_of(&identity, &[1.0, -1.0], 1000, Estimator::QrPropagated)
        .map_or(f64::INFINITY, |s| s.iter().map(|v| v.abs()).fold(0.0, f64::max));
    checks.push(Check::at_most("identity map |lambda|", zero, 0.0));

    let z = Matrix::<f64>::zeros(3, 3);
    let logs = if negative_control {
        svd(&z).map(|f| f.sigma.iter().map(|s| s.ln()).collect::<Vec<f64>>())
    } else {
        log_singular_values(&z, DEFAULT_SV_FLOOR)
    };
    let non_finite = logs.map_or(3, |l| l.iter().filter(|v| !v.is_finite()).count());
    let name = if negative_control {
        "zero matrix log singular values, floor disabled"
    } else {
        "zero matrix log singular values finite"
    };
    checks.push(Check::at_most(name, non_finite as f64, 0.0));

    ValidationReport { checks }
}
