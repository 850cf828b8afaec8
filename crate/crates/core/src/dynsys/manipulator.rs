//! Planar two-link arm with point masses at the link tips, driven by a joint
//! PD controller plus a Cartesian stiffness term. Each joint carries a rotor
//! inertia (`armature`).
//!
//! Joint angles are measured from the +x axis (`q1`) and relative to link one
//! (`q2`); gravity acts along -y.

use serde::{Deserialize, Serialize};

use crate::diffcore::Real;
use crate::error::{Error, Result};

pub const PARAM_NAMES: [&str; 16] = [
    "l1", "l2", "m1", "m2", "kp1", "kp2", "kd1", "kd2", "kc1", "kc2", "q_ref1", "q_ref2", "x_ref1",
    "x_ref2", "g", "armature",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorParams<T> {
    pub l1: T,
    pub l2: T,
    pub m1: T,
    pub m2: T,
    pub kp: [T; 2],
    pub kd: [T; 2],
    pub kc: [T; 2],
    pub q_ref: [T; 2],
    pub x_ref: [T; 2],
    pub g: T,
    /// Rotor inertia added to each joint's diagonal mass entry.
    pub armature: T,
}

impl<T: Real> ManipulatorParams<T> {
    /// Panics if `theta` is shorter than [`PARAM_NAMES`].
    pub fn from_slice(theta: &[T]) -> Self {
        Self {
            l1: theta[0],
            l2: theta[1],
            m1: theta[2],
            m2: theta[3],
            kp: [theta[4], theta[5]],
            kd: [theta[6], theta[7]],
            kc: [theta[8], theta[9]],
            q_ref: [theta[10], theta[11]],
            x_ref: [theta[12], theta[13]],
            g: theta[14],
            armature: theta[15],
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![
            self.l1, self.l2, self.m1, self.m2, self.kp[0], self.kp[1], self.kd[0], self.kd[1],
            self.kc[0], self.kc[1], self.q_ref[0], self.q_ref[1], self.x_ref[0], self.x_ref[1],
            self.g, self.armature,
        ]
    }
}

impl ManipulatorParams<f64> {
    /// Nominal arm of the co-design study, with `q_ref` set to the elbow-up
    /// inverse kinematics of `x_ref = (0.7, 0.7)`.
    pub fn nominal() -> Self {
        let mut p = Self {
            l1: 1.0,
            l2: 1.0,
            m1: 0.5,
            m2: 0.5,
            kp: [20.0, 20.0],
            kd: [5.0, 5.0],
            kc: [1.0, 1.0],
            q_ref: [0.0, 0.0],
            x_ref: [0.7, 0.7],
            g: 9.81,
            armature: 0.05,
        };
        p.q_ref = inverse_kinematics(&p, p.x_ref).expect("nominal target is reachable");
        p
    }
}

/// End-effector position.
pub fn forward_kinematics<T: Real>(p: &ManipulatorParams<T>, q: [T; 2]) -> [T; 2] {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    [p.l1 * c1 + p.l2 * c12, p.l1 * s1 + p.l2 * s12]
}

/// `∂ fk / ∂ q`, row-major 2x2.
pub fn ee_jacobian<T: Real>(p: &ManipulatorParams<T>, q: [T; 2]) -> [[T; 2]; 2] {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    [
        [-(p.l1 * s1) - p.l2 * s12, -(p.l2 * s12)],
        [p.l1 * c1 + p.l2 * c12, p.l2 * c12],
    ]
}

/// Closed-form elbow-up (`q2 >= 0`) inverse kinematics; `None` when out of reach.
pub fn inverse_kinematics(p: &ManipulatorParams<f64>, x: [f64; 2]) -> Option<[f64; 2]> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let c2 = (r2 - p.l1 * p.l1 - p.l2 * p.l2) / (2.0 * p.l1 * p.l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let q2 = c2.acos();
    let q1 = x[1].atan2(x[0]) - (p.l2 * q2.sin()).atan2(p.l1 + p.l2 * c2);
    Some([q1, q2])
}

/// Restoring joint torques:
/// `u = -Kp∘(q - q_ref) - Kd∘v - Kc∘(Jᵀ (fk(q) - x_ref))`.
pub fn control<T: Real>(p: &ManipulatorParams<T>, q: [T; 2], v: [T; 2]) -> [T; 2] {
    let x = forward_kinematics(p, q);
    let e = [x[0] - p.x_ref[0], x[1] - p.x_ref[1]];
    let j = ee_jacobian(p, q);
    let jt_e = [j[0][0] * e[0] + j[1][0] * e[1], j[0][1] * e[0] + j[1][1] * e[1]];
    let mut u = [T::zero(); 2];
    for i in 0..2 {
        u[i] = -(p.kp[i] * (q[i] - p.q_ref[i])) - p.kd[i] * v[i] - p.kc[i] * jt_e[i];
    }
    u
}

/// Joint-space mass matrix `[[m11, m12], [m12, m22]]`.
pub fn mass_matrix<T: Real>(p: &ManipulatorParams<T>, q: [T; 2]) -> [[T; 2]; 2] {
    let c2 = q[1].cos();
    let m2l2 = p.m2 * p.l2 * p.l2;
    let cross = p.m2 * p.l1 * p.l2 * c2;
    let m11 = (p.m1 + p.m2) * p.l1 * p.l1 + m2l2 + cross * 2.0 + p.armature;
    let m12 = m2l2 + cross;
    [[m11, m12], [m12, m2l2 + p.armature]]
}

/// Coriolis/centrifugal plus gravity torques, `C(q, v) v + g(q)`.
pub fn bias_torques<T: Real>(p: &ManipulatorParams<T>, q: [T; 2], v: [T; 2]) -> [T; 2] {
    let h = p.m2 * p.l1 * p.l2 * q[1].sin();
    let coriolis = [-(h * (v[0] * v[1] * 2.0 + v[1] * v[1])), h * v[0] * v[0]];
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    let g2 = p.m2 * p.g * p.l2 * c12;
    let g1 = (p.m1 + p.m2) * p.g * p.l1 * c1 + g2;
    [coriolis[0] + g1, coriolis[1] + g2]
}

/// Kinetic plus potential energy (zero potential at y = 0).
pub fn energy(p: &ManipulatorParams<f64>, q: [f64; 2], v: [f64; 2]) -> f64 {
    let m = mass_matrix(p, q);
    let kinetic = 0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1]);
    let y1 = p.l1 * q[0].sin();
    let y2 = y1 + p.l2 * (q[0] + q[1]).sin();
    kinetic + p.g * (p.m1 * y1 + p.m2 * y2)
}

pub fn kinetic_energy(p: &ManipulatorParams<f64>, q: [f64; 2], v: [f64; 2]) -> f64 {
    let m = mass_matrix(p, q);
    0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1])
}

const MIN_RELATIVE_DET: f64 = 1e-14;

/// Semi-implicit Euler: `v' = v + dt M⁻¹(u - C v - g)`, `q' = q + dt v'`.
pub fn step<T: Real>(p: &ManipulatorParams<T>, q: [T; 2], v: [T; 2], dt: f64) -> Result<([T; 2], [T; 2])> {
    let u = control(p, q, v);
    let m = mass_matrix(p, q);
    let bias = bias_torques(p, q, v);
    let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    let scale = m[0][0].value().abs() * m[1][1].value().abs();
    if !(det.value() > MIN_RELATIVE_DET * scale) {
        return Err(Error::domain(format!(
            "manipulator mass matrix is singular or indefinite (det {:e})",
            det.value()
        )));
    }
    let rhs = [u[0] - bias[0], u[1] - bias[1]];
    let acc = [
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[0][1] * rhs[0]) / det,
    ];
    let v_next = [v[0] + acc[0] * dt, v[1] + acc[1] * dt];
    let q_next = [q[0] + v_next[0] * dt, q[1] + v_next[1] * dt];
    Ok((q_next, v_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_arm() -> ManipulatorParams<f64> {
        ManipulatorParams {
            l1: 1.0,
            l2: 1.0,
            ..ManipulatorParams::nominal()
        }
    }

    #[test]
    fn fk_reference_poses() {
        let p = unit_arm();
        assert_eq!(forward_kinematics(&p, [0.0, 0.0]), [2.0, 0.0]);
        let up = forward_kinematics(&p, [FRAC_PI_2, 0.0]);
        assert!(up[0].abs() < 1e-15 && (up[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn control_vanishes_at_reference() {
        let mut p = ManipulatorParams::nominal();
        let q = p.q_ref;
        p.x_ref = forward_kinematics(&p, q);
        assert_eq!(control(&p, q, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn pure_damping_control() {
        let p = ManipulatorParams {
            kp: [0.0; 2],
            kc: [0.0; 2],
            ..ManipulatorParams::nominal()
        };
        let u = control(&p, [0.3, -1.0], [0.4, -2.0]);
        assert_eq!(u, [-5.0 * 0.4, -5.0 * -2.0]);
    }

    #[test]
    fn hanging_rest_is_equilibrium() {
        // Straight down: cos q1 = cos(q1 + q2) = 0, so gravity torques vanish.
        let p = ManipulatorParams {
            kp: [0.0; 2],
            kd: [0.0; 2],
            kc: [0.0; 2],
            ..ManipulatorParams::nominal()
        };
        let q = [-FRAC_PI_2, 0.0];
        let (q1, v1) = step(&p, q, [0.0, 0.0], 1e-3).unwrap();
        assert!((q1[0] - q[0]).abs() < 1e-15 && q1[1].abs() < 1e-15);
        assert!(v1[0].abs() < 1e-13 && v1[1].abs() < 1e-13);
    }

    #[test]
    fn mass_matrix_singularity_is_reported() {
        let p = ManipulatorParams {
            m2: 0.0,
            armature: 0.0,
            ..ManipulatorParams::nominal()
        };
        assert!(matches!(step(&p, [0.1, 0.2], [0.0, 0.0], 1e-3), Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn ik_roundtrip() {
        let p = ManipulatorParams::nominal();
        let x = forward_kinematics(&p, p.q_ref);
        assert!((x[0] - 0.7).abs() < 1e-14 && (x[1] - 0.7).abs() < 1e-14);
        assert!(inverse_kinematics(&p, [3.0, 0.0]).is_none());
    }
}
