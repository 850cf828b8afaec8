use lyra::diffcore::grad_scalar_fd;
use lyra::dynsys::{SystemId, TransitionMap};
use lyra::linalg::Matrix;
use lyra::lyap::Estimator;
use lyra::opt::{
    adam_step, codesign, eval_loss, AdamConfig, Bounds, CodesignOptions, GradMethod, LossSpec, Objective,
    OptimizerState, TaskTerm, TermKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn adam_descends_a_quadratic_bowl() {
    let target = [1.5, -0.5, 3.0];
    let config = AdamConfig { lr: 0.05, ..AdamConfig::default() };
    let mut state = OptimizerState::unbounded(vec![0.0, 0.0, 0.0], config).unwrap();
    for _ in 0..500 {
        let grad: Vec<f64> = state.theta.iter().zip(&target).map(|(t, s)| 2.0 * (t - s)).collect();
        state = adam_step(&state, &grad).unwrap();
    }
    let dist = state.theta.iter().zip(&target).map(|(t, s)| (t - s).powi(2)).sum::<f64>().sqrt();
    assert!(dist < 1e-3, "distance {dist}");
}

proptest! {
    #[test]
    fn projection_keeps_every_iterate_in_bounds(
        grads in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..40),
        lr in 1e-3f64..2.0,
    ) {
        let bounds = vec![Bounds::new(0.0, 1e-3), Bounds::new(-1.0, -0.999), Bounds::new(5.0, 5.0)];
        let config = AdamConfig { lr, ..AdamConfig::default() };
        let mut state = OptimizerState::new(vec![5e-4, -0.9995, 5.0], bounds.clone(), config).unwrap();
        for g in &grads {
            state = adam_step(&state, g).unwrap();
            for (t, b) in state.theta.iter().zip(&bounds) {
                prop_assert!(b.contains(*t), "{} outside [{}, {}]", t, b.lower, b.upper);
            }
        }
    }
}

struct Case {
    map: TransitionMap,
    x0: Vec<f64>,
    spec: LossSpec,
    free: Vec<usize>,
    spread: f64,
}

fn smooth_cases() -> Vec<Case> {
    let henon = TransitionMap::preset(SystemId::Henon);
    let vdp = TransitionMap::preset(SystemId::Vanderpol);
    let arm = TransitionMap::preset(SystemId::Manipulator2r);
    let arm_free = ["l1", "m2", "kp1", "kd2", "kc1"].iter().map(|n| arm.param_index(n).unwrap()).collect();
    vec![
        Case {
            x0: vec![0.1, 0.1],
            spec: LossSpec {
                weight_robustness: 1.0,
                terms: vec![TaskTerm { kind: TermKind::TargetPosition, reference: vec![0.3, 0.1], weight: 1.0 }],
                horizon: 6,
                estimator: Estimator::QrPropagated,
                burn_in: 0,
            },
            free: vec![0, 1],
            spread: 0.05,
            map: henon,
        },
        Case {
            x0: vec![1.0, 0.5],
            spec: LossSpec {
                weight_robustness: 0.1,
                terms: vec![TaskTerm { kind: TermKind::TargetPosition, reference: vec![0.0, 1.0], weight: 1.0 }],
                horizon: 500,
                estimator: Estimator::SvdLocal,
                burn_in: 100,
            },
            free: vec![0],
            spread: 0.5,
            map: vdp,
        },
        Case {
            x0: arm.default_initial_state(),
            spec: LossSpec {
                weight_robustness: 0.01,
                terms: vec![
                    TaskTerm { kind: TermKind::TargetPosition, reference: vec![0.7, 0.7], weight: 1.0 },
                    TaskTerm { kind: TermKind::ControlEffort, reference: vec![], weight: 1e-3 },
                ],
                horizon: 300,
                estimator: Estimator::SvdLocal,
                burn_in: 0,
            },
            free: arm_free,
            spread: 0.2,
            map: arm,
        },
    ]
}

#[test]
fn finite_differences_agree_with_nested_jets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in smooth_cases() {
        let base = case.map.params().to_vec();
        for _ in 0..10 {
            let theta: Vec<f64> = base
                .iter()
                .enumerate()
                .map(|(i, &t)| if case.free.contains(&i) { t * (1.0 + rng.random_range(-case.spread..case.spread)) } else { t })
                .collect();
            let obj = Objective { map: &case.map, theta: &theta, x0: &case.x0, spec: &case.spec, free: &case.free };
            let at = obj.free_values();
            let (e_fd, g_fd) = obj.gradient(&at, GradMethod::FdCentral, 1e-6).unwrap();
            let (e_nj, g_nj) = obj.gradient(&at, GradMethod::NestedJets, 0.0).unwrap();
            assert!(!e_fd.blew_up);
            assert!((e_fd.loss - e_nj.loss).abs() < 1e-10 * (1.0 + e_fd.loss.abs()));
            let norm = g_nj.iter().map(|g| g * g).sum::<f64>().sqrt();
            let gap = g_fd.iter().zip(&g_nj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(gap <= 1e-3 * norm, "{}: {g_fd:?} vs {g_nj:?}", case.map.system());
        }
    }
}

fn logistic_metric(r: f64, n: usize) -> f64 {
    let map = TransitionMap::logistic(r).unwrap();
    let spec = LossSpec { weight_robustness: 1.0, terms: vec![], horizon: n, estimator: Estimator::SvdLocal, burn_in: 0 };
    eval_loss(&map, &[r], &[0.3], &spec).unwrap().loss
}

#[test]
fn logistic_gradient_matches_five_point_stencil() {
    let (r, n) = (3.9, 8);
    let g = grad_scalar_fd(|t| logistic_metric(t[0], n), &[r], 1e-6).unwrap()[0];
    let h = 1e-3;
    let f = |dr: f64| logistic_metric(r + dr, n);
    let five = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
    assert!((g - five).abs() < 1e-4 * (1.0 + five.abs()), "{g} vs {five}");
}

#[test]
fn nominal_arm_is_dissipative() {
    let map = TransitionMap::preset(SystemId::Manipulator2r);
    let spec = LossSpec {
        weight_robustness: 1.0,
        terms: vec![TaskTerm { kind: TermKind::TargetPosition, reference: vec![0.7, 0.7], weight: 1.0 }],
        horizon: 2000,
        estimator: Estimator::SvdLocal,
        burn_in: 0,
    };
    let e = eval_loss(&map, map.params(), &map.default_initial_state(), &spec).unwrap();
    let l = e.l_lambda.unwrap();
    assert!(l < 0.0);
    assert!((e.loss - (l + e.terms[0].weighted)).abs() < 1e-12 * e.loss.abs().max(1.0));
}

#[test]
fn optimum_is_a_fixed_point_of_the_loop() {
    // x' = a x from x0 = 2 with target 3 after one step: a* = 1.5
    let map = TransitionMap::linear(Matrix::from_diag(&[1.5])).unwrap();
    let spec = LossSpec {
        weight_robustness: 0.0,
        terms: vec![TaskTerm { kind: TermKind::TargetPosition, reference: vec![3.0], weight: 1.0 }],
        horizon: 1,
        estimator: Estimator::SvdLocal,
        burn_in: 0,
    };
    for method in [GradMethod::NestedJets, GradMethod::FdCentral] {
        let opts = CodesignOptions {
            grad_method: method,
            ..CodesignOptions::new(vec![0], vec![Bounds::FREE], 20)
        };
        let res = codesign(&map, map.params(), &[2.0], &spec, &opts).unwrap();
        assert_eq!(res.history.len(), 21);
        for row in &res.history {
            assert!(row.loss < 1e-20);
            assert!((row.theta[0] - 1.5).abs() < 1e-6, "{method}: {}", row.theta[0]);
        }
    }
}

#[test]
fn best_loss_never_increases() {
    let map = TransitionMap::preset(SystemId::Henon);
    let spec = LossSpec {
        weight_robustness: 1.0,
        terms: vec![TaskTerm { kind: TermKind::TargetPosition, reference: vec![0.5, 0.0], weight: 1.0 }],
        horizon: 10,
        estimator: Estimator::QrPropagated,
        burn_in: 0,
    };
    let opts = CodesignOptions {
        adam: AdamConfig { lr: 0.05, ..AdamConfig::default() },
        ..CodesignOptions::new(vec![0, 1], vec![Bounds::new(1.0, 1.4), Bounds::new(0.1, 0.3)], 30)
    };
    let res = codesign(&map, map.params(), &[0.1, 0.1], &spec, &opts).unwrap();
    assert!(res.history.windows(2).all(|w| w[1].best_loss <= w[0].best_loss));
    assert_eq!(res.history.last().unwrap().best_loss, res.best_loss);
    assert!(res.best_loss <= res.history[0].loss);
    for row in &res.history {
        assert!((1.0..=1.4).contains(&row.theta[0]) && (0.1..=0.3).contains(&row.theta[1]));
    }
}
