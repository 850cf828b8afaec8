use lyra::diffcore::jacobian_state;
use lyra::dynsys::hopper::{self, forces, normal_force};
use lyra::dynsys::manipulator::{
    control, energy, forward_kinematics, inverse_kinematics, kinetic_energy, mass_matrix,
};
use lyra::dynsys::{GaitParams, HopperParams, ManipulatorParams, TransitionMap};
use lyra::lyap::rollout;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_arm(kd: f64, g: f64) -> ManipulatorParams<f64> {
    ManipulatorParams {
        kp: [0.0, 0.0],
        kd: [kd, kd],
        kc: [0.0, 0.0],
        g,
        ..ManipulatorParams::nominal()
    }
}

fn qv(x: &[f64]) -> ([f64; 2], [f64; 2]) {
    ([x[0], x[1]], [x[2], x[3]])
}

#[test]
fn henon_jacobian_determinant_is_b() {
    let map = TransitionMap::henon(1.4, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let x = [rng.random_range(-1.5..1.5), rng.random_range(-0.4..0.4)];
        let j = jacobian_state(&map, &x, map.params()).unwrap();
        assert!((j.entries.det().abs() - 0.3).abs() < 1e-15);
    }
}

#[test]
fn pure_damping_drains_kinetic_energy() {
    let p = free_arm(2.0, 0.0);
    let map = TransitionMap::manipulator(p, 1e-3).unwrap();
    let traj = rollout(&map, &[0.3, 1.0, 1.5, -2.0], 3000).unwrap();
    let ke: Vec<f64> = traj.states().map(|x| { let (q, v) = qv(x); kinetic_energy(&p, q, v) }).collect();
    assert!(ke.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert!(ke.last().unwrap() < &(0.05 * ke[0]));
}

#[test]
fn unactuated_arm_conserves_energy() {
    let p = free_arm(0.0, 9.81);
    let map = TransitionMap::manipulator(p, 1e-4).unwrap();
    let traj = rollout(&map, &[0.2, 0.5, 0.0, 0.0], 10_000).unwrap();
    let e: Vec<f64> = traj.states().map(|x| { let (q, v) = qv(x); energy(&p, q, v) }).collect();
    let swing = e.iter().cloned().fold(f64::MIN, f64::max) - e.iter().cloned().fold(f64::MAX, f64::min);
    // relative to the largest potential drop available to the arm
    let scale = p.g * (p.m1 * p.l1 + p.m2 * (p.l1 + p.l2));
    assert!(swing / scale < 1e-2, "drift {}", swing / scale);
}

/// `M = Σ m_i J_iᵀ J_i + armature I` from the point-mass position Jacobians.
fn mass_matrix_oracle(p: &ManipulatorParams<f64>, q: [f64; 2]) -> [[f64; 2]; 2] {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let j1 = [[-p.l1 * s1, 0.0], [p.l1 * c1, 0.0]];
    let j2 = [[-p.l1 * s1 - p.l2 * s12, -p.l2 * s12], [p.l1 * c1 + p.l2 * c12, p.l2 * c12]];
    let mut m = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            for k in 0..2 {
                m[r][c] += p.m1 * j1[k][r] * j1[k][c] + p.m2 * j2[k][r] * j2[k][c];
            }
        }
        m[r][r] += p.armature;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn mass_matrix_is_spd(q1 in -3.2f64..3.2, q2 in -3.2f64..3.2, m1 in 0.01f64..2.0, m2 in 0.01f64..2.0, l1 in 0.3f64..2.0, l2 in 0.3f64..2.0) {
        let p = ManipulatorParams { m1, m2, l1, l2, ..ManipulatorParams::nominal() };
        let m = mass_matrix(&p, [q1, q2]);
        prop_assert_eq!(m[0][1], m[1][0]);
        prop_assert!(m[0][0] > 0.0);
        prop_assert!(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0);
        let o = mass_matrix_oracle(&p, [q1, q2]);
        for r in 0..2 {
            for c in 0..2 {
                prop_assert!((m[r][c] - o[r][c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn control_law_at_a_sample_state() {
    let p = ManipulatorParams::nominal();
    let (q, v) = ([0.3, 0.4], [0.1, -0.2]);
    let u = control(&p, q, v);
    let ex = (0.3f64).cos() + (0.7f64).cos() - 0.7;
    let ey = (0.3f64).sin() + (0.7f64).sin() - 0.7;
    let jt_e = [
        -((0.3f64).sin() + (0.7f64).sin()) * ex + ((0.3f64).cos() + (0.7f64).cos()) * ey,
        -(0.7f64).sin() * ex + (0.7f64).cos() * ey,
    ];
    let want = [
        -20.0 * (0.3 - p.q_ref[0]) - 5.0 * 0.1 - jt_e[0],
        -20.0 * (0.4 - p.q_ref[1]) + 5.0 * 0.2 - jt_e[1],
    ];
    assert!((u[0] - want[0]).abs() < 1e-13);
    assert!((u[1] - want[1]).abs() < 1e-13);
}

#[test]
fn inverse_kinematics_matches_grid_search() {
    let p = ManipulatorParams::nominal();
    let target = [0.7, 0.7];
    let q = inverse_kinematics(&p, target).unwrap();
    let x = forward_kinematics(&p, q);
    assert!((x[0] - target[0]).abs() < 1e-12 && (x[1] - target[1]).abs() < 1e-12);

    let n = 2000;
    let grid = |i: usize| -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / n as f64;
    let mut best = (f64::MAX, [0.0, 0.0]);
    for i in 0..n {
        for j in 0..=n / 2 {
            let cand = [grid(i), std::f64::consts::PI * j as f64 / (n / 2) as f64];
            let x = forward_kinematics(&p, cand);
            let err = (x[0] - target[0]).hypot(x[1] - target[1]);
            if err < best.0 {
                best = (err, cand);
            }
        }
    }
    let spacing = std::f64::consts::TAU / n as f64;
    assert!((best.1[0] - q[0]).abs() < 2.0 * spacing);
    assert!((best.1[1] - q[1]).abs() < 2.0 * spacing);
    assert!(inverse_kinematics(&p, [3.0, 0.0]).is_none());
}

fn still_gait() -> HopperParams<f64> {
    HopperParams {
        gait: GaitParams {
            a0: 0.0,
            a1: 0.0,
            ..HopperParams::nominal().gait
        },
        ..HopperParams::nominal()
    }
}

#[test]
fn hopper_comes_to_rest_on_the_static_contact_point() {
    let p = still_gait();
    let map = TransitionMap::hopper(p, 2e-3).unwrap();
    let traj = rollout(&map, &[0.55, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0], 10_000).unwrap();
    let x = traj.last();
    let next = map.step(x).unwrap();
    // the clock always advances and the horizontal position is neutral
    for k in [0, 2, 3, 4, 5, 6, 7] {
        assert!((next[k] - x[k]).abs() < 1e-9, "component {k}");
    }
    // spring force of the ramp balances the weight: kg pen² / (2w) = m g
    let weight = p.body_mass * p.gravity;
    let pen = (2.0 * p.contact_width * weight / p.ground_stiffness).sqrt();
    assert!(pen < p.contact_width);
    let f = forces(&p, x);
    assert!((-f.clearance - pen).abs() < 1e-7, "{} vs {pen}", -f.clearance);
    assert!((f.normal - weight).abs() < 1e-6);
}

#[test]
fn nominal_gait_reaches_a_periodic_orbit() {
    let map = TransitionMap::preset(lyra::dynsys::SystemId::Hopper1d);
    let period = (1.0 / map.dt()).round() as usize;
    let n = 30 * period;
    let traj = rollout(&map, &map.default_initial_state(), n).unwrap();
    let (a, b) = (traj.state(n - period), traj.state(n));
    for k in [0, 2, 3, 4, 5, 6, 7] {
        assert!((a[k] - b[k]).abs() < 1e-3, "component {k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn contact_force_is_continuously_differentiable() {
    let p = HopperParams::nominal();
    let w = p.contact_width;
    let h = 1e-9;
    for rate in [-0.5, 0.0, 0.3] {
        for knot in [0.0, w] {
            let left = normal_force(&p, knot - h, rate);
            let right = normal_force(&p, knot + h, rate);
            assert!((right - left).abs() < 1e5 * h);
            let dl = (normal_force(&p, knot - h, rate) - normal_force(&p, knot - 2.0 * h, rate)) / h;
            let dr = (normal_force(&p, knot + 2.0 * h, rate) - normal_force(&p, knot + h, rate)) / h;
            assert!((dl - dr).abs() < 1e-2 * (1.0 + dl.abs()), "pen {knot} rate {rate}: {dl} vs {dr}");
        }
    }
    for knot in [0.0, hopper::CONTACT_RATE_WIDTH] {
        let pen = 2.0 * w;
        let dl = (normal_force(&p, pen, knot - h) - normal_force(&p, pen, knot - 2.0 * h)) / h;
        let dr = (normal_force(&p, pen, knot + 2.0 * h) - normal_force(&p, pen, knot + h)) / h;
        assert!((dl - dr).abs() < 1e-2 * (1.0 + dl.abs()));
    }
}
