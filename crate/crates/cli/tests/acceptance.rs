//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use lyra::dynsys::{SystemId, TransitionMap};
use lyra::linalg::Matrix;
use lyra::lyap::{rollout, spectrum, Estimator, EstimatorOptions, LyapunovSpectrum};
use lyra::opt::{codesign, CodesignResult};
use lyra_cli::config::Experiment;
use lyra_cli::presets::preset;
use lyra_cli::run::{run_invariance, run_spectrum, sweep_rows};
use lyra_cli::validate::{decomposition_checks, jet_fd_gap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
    /// Values that must be bitwise identical whatever the thread count.
    fingerprint: Vec<f64>,
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget_s: f64,
    run: fn() -> Verdict,
}

fn experiment(name: &str) -> Experiment {
    Experiment::new(preset(name).expect("preset exists")).expect("preset validates")
}

fn henon_spectrum(n: usize, est: Estimator) -> LyapunovSpectrum {
    let map = TransitionMap::preset(SystemId::Henon);
    spectrum(&rollout(&map, &[0.1, 0.1], n).unwrap(), est, EstimatorOptions::default()).unwrap()
}

fn vanderpol() -> Verdict {
    let exp = experiment("vanderpol");
    let rec = run_invariance(&exp).unwrap().record.unwrap();
    let inv = rec.invariance.unwrap();
    let dt = rec.dt;
    let mut worst_l1: f64 = 0.0;
    let mut max_l2 = f64::NEG_INFINITY;
    let mut fp = Vec::new();
    for s in &inv.samples {
        let e = s.exponents.clone().unwrap_or_else(|| vec![f64::NAN; 2]);
        worst_l1 = worst_l1.max((e[0] * dt).abs());
        max_l2 = max_l2.max(e[1] * dt);
        fp.extend(e);
    }
    let passed = inv.samples.len() >= 20
        && inv.failures == 0
        && worst_l1 <= 1e-3
        && max_l2 < 0.0
        && inv.max_spread_per_step < 2e-3;
    Verdict {
        passed,
        detail: format!(
            "{} samples, max|l1| {worst_l1:.2e}/step, max l2 {max_l2:.3e}/step, spread {:.2e}/step",
            inv.samples.len(),
            inv.max_spread_per_step
        ),
        fingerprint: fp,
    }
}

fn logistic() -> Verdict {
    let exp = experiment("logistic");
    let l = run_spectrum(&exp).unwrap().record.unwrap().exponents.unwrap()[0];
    let gap = (l - std::f64::consts::LN_2).abs();
    Verdict {
        passed: gap <= 1e-3,
        detail: format!("lambda {l:.9}, |lambda - ln 2| {gap:.2e}"),
        fingerprint: vec![l],
    }
}

/// Tangent-vector renormalisation written out longhand for the Henon map.
fn henon_leading_oracle(a: f64, b: f64, n: usize) -> f64 {
    let (mut x, mut y) = (0.1, 0.1);
    let (mut u, mut v) = (1.0, 0.0);
    let mut acc = 0.0;
    for _ in 0..n {
        let (nu, nv) = (-2.0 * a * x * u + v, b * u);
        let norm = nu.hypot(nv);
        acc += norm.ln();
        u = nu / norm;
        v = nv / norm;
        (x, y) = (1.0 - a * x * x + y, b * x);
    }
    acc / n as f64
}

fn henon() -> Verdict {
    let exp = experiment("henon");
    let e = run_spectrum(&exp).unwrap().record.unwrap().exponents.unwrap();
    let sum: f64 = e.iter().sum();
    let oracle = henon_leading_oracle(1.4, 0.3, 1_000_000);
    let sum_gap = (sum - 0.3f64.ln()).abs();
    let l1_gap = (e[0] - 0.419).abs();
    let oracle_gap = (e[0] - oracle).abs();
    Verdict {
        passed: sum_gap <= 1e-6 && l1_gap <= 0.01 && oracle_gap <= 1e-6,
        detail: format!("lambda {e:.6?}, |sum - ln 0.3| {sum_gap:.2e}, |l1 - 0.419| {l1_gap:.2e}, |l1 - oracle| {oracle_gap:.2e}"),
        fingerprint: e,
    }
}

fn jacobians() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for system in SystemId::ALL {
        let gap = jet_fd_gap(&TransitionMap::preset(system), &mut rng, 100);
        parts.push(format!("{system} {gap:.1e}"));
        worst = worst.max(gap);
    }
    Verdict {
        passed: worst < 1e-5,
        detail: parts.join(", "),
        fingerprint: vec![worst],
    }
}

fn decompositions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let [q, s] = decomposition_checks(&mut rng, 1000);
    Verdict {
        passed: q.passed && s.passed && q.measured < 1e-10 && s.measured < 1e-10,
        detail: format!("1000 matrices, qr {:.2e}, svd {:.2e}", q.measured, s.measured),
        fingerprint: vec![q.measured, s.measured],
    }
}

fn optimise(name: &str) -> CodesignResult {
    let exp = experiment(name);
    let theta0 = exp.map.params().to_vec();
    codesign(&exp.map, &theta0, &exp.initial_state(), exp.loss().unwrap(), &exp.codesign_options().unwrap()).unwrap()
}

fn fingerprint(res: &CodesignResult) -> Vec<f64> {
    let mut fp: Vec<f64> = res.history.iter().map(|r| r.loss).collect();
    fp.extend(&res.theta);
    fp
}

fn manipulator() -> Verdict {
    let res = optimise("manipulator-codesign");
    let h = &res.history;
    let iters = h.len() - 1;
    let (l0, lb) = (h[0].l_lambda.unwrap_or(f64::NAN), res.best.l_lambda.unwrap_or(f64::NAN));
    let mid = h[iters / 2].best_loss;
    let late = (mid - res.best_loss) / mid.abs();
    Verdict {
        passed: iters == 50 && res.best_loss < h[0].loss && lb < l0 && late < 0.01,
        detail: format!(
            "loss {:.4e} -> {:.4e}, L {l0:.4e} -> {lb:.4e}, final-half gain {:.2}%",
            h[0].loss,
            res.best_loss,
            100.0 * late
        ),
        fingerprint: fingerprint(&res),
    }
}

/// Rank correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn hopper_sweep() -> Verdict {
    let exp = experiment("hopper-sweep");
    let rows = sweep_rows(&exp).unwrap();
    let failures = rows.iter().filter(|r| r.l_lambda.is_none()).count();
    let mut worst = f64::NEG_INFINITY;
    for slice in rows.chunks(10) {
        let kd: Vec<f64> = slice.iter().map(|r| r.values[1]).collect();
        let l: Vec<f64> = slice.iter().map(|r| r.l_lambda.unwrap_or(f64::NAN)).collect();
        worst = worst.max(spearman(&kd, &l));
    }
    Verdict {
        passed: rows.len() == 100 && failures == 0 && worst <= -0.9,
        detail: format!("{} points, {failures} failed, worst slice Spearman {worst:.3}", rows.len()),
        fingerprint: rows.iter().map(|r| r.l_lambda.unwrap_or(f64::NAN)).collect(),
    }
}

fn hopper_gait() -> Verdict {
    let res = optimise("hopper-gait");
    let base = res.history[0].l_lambda.unwrap_or(f64::NAN);
    let best = res.best.l_lambda.unwrap_or(f64::NAN);
    Verdict {
        passed: base < 0.0 && best < 0.0 && best < base,
        detail: format!("baseline L {base:.4e}, optimised L {best:.4e}"),
        fingerprint: fingerprint(&res),
    }
}

fn estimator_gap() -> Verdict {
    let rotation = {
        let (c, s) = (0.3f64.cos() * 0.9, 0.3f64.sin() * 0.9);
        Matrix::from_row_major(2, 2, vec![c, -s, s, c])
    };
    let maps = [
        Matrix::identity(2),
        Matrix::from_diag(&[1.2, 0.9, 0.1]),
        Matrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 1.0]),
        rotation,
        Matrix::from_row_major(1, 1, vec![1.0]),
    ];
    let opts = EstimatorOptions {
        burn_in: 50,
        ..EstimatorOptions::default()
    };
    let mut worst: f64 = 0.0;
    for a in maps {
        let d = a.rows();
        let map = TransitionMap::linear(a).unwrap();
        let traj = rollout(&map, &vec![0.5; d], 600).unwrap();
        let local = spectrum(&traj, Estimator::SvdLocal, opts).unwrap();
        let prop = spectrum(&traj, Estimator::QrPropagated, opts).unwrap();
        for (x, y) in local.exponents.iter().zip(&prop.exponents) {
            worst = worst.max((x - y).abs());
        }
    }
    let local = henon_spectrum(1_000_000, Estimator::SvdLocal);
    let prop = henon_spectrum(1_000_000, Estimator::QrPropagated);
    let gap: Vec<f64> = local.exponents.iter().zip(&prop.exponents).map(|(x, y)| x - y).collect();
    let shown: Vec<String> = gap.iter().map(|g| format!("{g:+.6e}")).collect();
    let mut fp = gap.clone();
    fp.push(worst);
    Verdict {
        passed: worst <= 1e-12 && gap.iter().all(|g| g.is_finite()),
        detail: format!("normal constant maps max gap {worst:.2e}; henon svd_local - qr_propagated = [{}]", shown.join(", ")),
        fingerprint: fp,
    }
}

const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, name: "van der pol spectrum and invariance", budget_s: 30.0, run: vanderpol },
    Criterion { id: 2, name: "logistic r=4", budget_s: 5.0, run: logistic },
    Criterion { id: 3, name: "henon sum and leading exponent", budget_s: 10.0, run: henon },
    Criterion { id: 4, name: "jet jacobians vs central differences", budget_s: f64::INFINITY, run: jacobians },
    Criterion { id: 5, name: "qr and svd residuals", budget_s: f64::INFINITY, run: decompositions },
    Criterion { id: 6, name: "manipulator co-design", budget_s: 600.0, run: manipulator },
    Criterion { id: 7, name: "hopper damping sweep", budget_s: 300.0, run: hopper_sweep },
    Criterion { id: 8, name: "hopper gait robustness", budget_s: 600.0, run: hopper_gait },
    Criterion { id: 10, name: "estimator gap report", budget_s: f64::INFINITY, run: estimator_gap },
];

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool").install(f)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn main() {
    let mut lines: Vec<(usize, bool, String)> = Vec::new();
    let mut report = |id: usize, name: &str, passed: bool, detail: &str| {
        lines.push((id, passed, format!("{} {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" })));
    };

    let mut prints = Vec::new();
    for c in &CRITERIA {
        let t0 = Instant::now();
        let v = in_pool(1, c.run);
        let secs = t0.elapsed().as_secs_f64();
        let within = secs < c.budget_s;
        let budget = if c.budget_s.is_finite() { format!(" < {} s", c.budget_s) } else { String::new() };
        report(c.id, c.name, v.passed && within, &format!("{} [{secs:.2} s{budget}]", v.detail));
        prints.push(bits(&v.fingerprint));
    }

    let mut mismatched = Vec::new();
    for threads in [2, 8] {
        for (c, reference) in CRITERIA.iter().zip(&prints) {
            if bits(&in_pool(threads, c.run).fingerprint) != *reference {
                mismatched.push(format!("{} at {threads} threads", c.id));
            }
        }
    }
    let detail = if mismatched.is_empty() {
        "bitwise identical at 1, 2 and 8 threads".to_string()
    } else {
        format!("differs: {}", mismatched.join(", "))
    };
    report(9, "determinism across thread counts", mismatched.is_empty(), &detail);

    lines.sort_by_key(|l| l.0);
    for (_, _, line) in &lines {
        println!("{line}");
    }
    if lines.iter().any(|l| !l.1) {
        std::process::exit(1);
    }
}
