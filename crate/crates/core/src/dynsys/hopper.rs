//! Single-leg penalty-contact hopper.
//!
//! A point-mass body translates vertically (`z`) and horizontally (`y`); a
//! massless two-segment leg hangs from it with actuated hip and knee joints
//! (rotor inertia `joint_inertia` each). The foot touches the ground through a
//! C¹ penalty force, with regularised Coulomb friction driving `y`. A passive
//! spring-damper acts along the leg length. The clock `phi` is carried in the
//! state so the map stays autonomous.
//!
//! State layout: `[z, y, q_hip, q_knee, ż, ẏ, q̇_hip, q̇_knee, phi]`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::gait::{gait_reference, pd_torque, GaitParams};
use crate::diffcore::Real;

pub const STATE_DIM: usize = 9;

pub const BODY_PARAM_NAMES: [&str; 10] = [
    "body_mass",
    "leg_rest_length",
    "leg_stiffness",
    "leg_damping",
    "ground_stiffness",
    "ground_damping",
    "contact_width",
    "joint_inertia",
    "friction",
    "gravity",
];

/// Velocity scale for the non-adhesive clamp on contact damping (m/s).
pub const CONTACT_RATE_WIDTH: f64 = 1e-2;
/// Slip speed at which friction saturates via `tanh` (m/s).
pub const FRICTION_SLIP_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopperParams<T> {
    pub body_mass: T,
    pub leg_rest_length: T,
    pub leg_stiffness: T,
    pub leg_damping: T,
    pub ground_stiffness: T,
    pub ground_damping: T,
    pub contact_width: T,
    pub joint_inertia: T,
    pub friction: T,
    pub gravity: T,
    pub gait: GaitParams<T>,
}

impl<T: Real> HopperParams<T> {
    pub fn from_slice(theta: &[T]) -> Self {
        Self {
            body_mass: theta[0],
            leg_rest_length: theta[1],
            leg_stiffness: theta[2],
            leg_damping: theta[3],
            ground_stiffness: theta[4],
            ground_damping: theta[5],
            contact_width: theta[6],
            joint_inertia: theta[7],
            friction: theta[8],
            gravity: theta[9],
            gait: GaitParams::from_slice(&theta[10..]),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = vec![
            self.body_mass,
            self.leg_rest_length,
            self.leg_stiffness,
            self.leg_damping,
            self.ground_stiffness,
            self.ground_damping,
            self.contact_width,
            self.joint_inertia,
            self.friction,
            self.gravity,
        ];
        v.extend(self.gait.to_vec());
        v
    }
}

impl HopperParams<f64> {
    pub fn nominal() -> Self {
        Self {
            body_mass: 1.0,
            leg_rest_length: 0.5,
            leg_stiffness: 300.0,
            leg_damping: 2.0,
            ground_stiffness: 5000.0,
            ground_damping: 50.0,
            contact_width: 5e-3,
            joint_inertia: 0.02,
            friction: 0.8,
            gravity: 9.81,
            gait: GaitParams {
                a0: 0.3,
                a1: 0.2,
                f0: 1.0,
                f1: 1.0,
                p0: 0.0,
                p1: FRAC_PI_2,
                delta: 0.0,
                kp: 10.0,
                kd: 0.3,
                q_ref_hip: 0.0,
                q_ref_knee: 0.8,
            },
        }
    }
}

/// C¹ ramp of width `w`: 0 below 0, `x²/2w` on `[0, w]`, `x - w/2` above.
pub fn smooth_ramp<T: Real>(x: T, w: T) -> T {
    let xv = x.value();
    if xv <= 0.0 {
        T::zero()
    } else if xv < w.value() {
        x * x / (w * 2.0)
    } else {
        x - w * 0.5
    }
}

/// Derivative of [`smooth_ramp`], a clamped linear ramp in `[0, 1]`.
pub fn smooth_ramp_slope<T: Real>(x: T, w: T) -> T {
    let xv = x.value();
    if xv <= 0.0 {
        T::zero()
    } else if xv < w.value() {
        x / w
    } else {
        T::one()
    }
}

/// C¹ onset of width `w`: 0 below 0, `3u² - 2u³` with `u = x / w` on
/// `[0, w]`, 1 above.
pub fn smooth_step<T: Real>(x: T, w: T) -> T {
    let xv = x.value();
    if xv <= 0.0 {
        T::zero()
    } else if xv < w.value() {
        let u = x / w;
        u * u * (T::cst(3.0) - u * 2.0)
    } else {
        T::one()
    }
}

/// Foot geometry relative to the hip.
#[derive(Debug, Clone, Copy)]
pub struct LegKinematics<T> {
    /// Downward foot offset below the body.
    pub depth: T,
    /// Forward foot offset.
    pub reach: T,
    pub ddepth: [T; 2],
    pub dreach: [T; 2],
}

pub fn leg_kinematics<T: Real>(rest_length: T, q_hip: T, q_knee: T) -> LegKinematics<T> {
    let seg = rest_length * 0.5;
    let (s1, c1) = q_hip.sin_cos();
    let (s12, c12) = (q_hip + q_knee).sin_cos();
    LegKinematics {
        depth: seg * (c1 + c12),
        reach: seg * (s1 + s12),
        ddepth: [-(seg * (s1 + s12)), -(seg * s12)],
        dreach: [seg * (c1 + c12), seg * c12],
    }
}

/// Normal ground force for penetration `pen = -clearance` and penetration rate.
pub fn normal_force<T: Real>(p: &HopperParams<T>, pen: T, pen_rate: T) -> T {
    let spring = p.ground_stiffness * smooth_ramp(pen, p.contact_width);
    let damper = p.ground_damping
        * smooth_step(pen, p.contact_width)
        * smooth_ramp(pen_rate, T::cst(CONTACT_RATE_WIDTH));
    spring + damper
}

/// Forces evaluated at one state; exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy)]
pub struct HopperForces<T> {
    pub clearance: T,
    pub normal: T,
    pub tangential: T,
    /// Actuator (PD) torques.
    pub torque: [T; 2],
    /// Body accelerations `[z̈, ÿ]` and joint accelerations.
    pub acc: [T; 4],
}

pub fn forces<T: Real>(p: &HopperParams<T>, x: &[T]) -> HopperForces<T> {
    let (z, qh, qk) = (x[0], x[2], x[3]);
    let (vz, vy, wh, wk, phi) = (x[4], x[5], x[6], x[7], x[8]);
    let leg = leg_kinematics(p.leg_rest_length, qh, qk);

    let clearance = z - leg.depth;
    let depth_rate = leg.ddepth[0] * wh + leg.ddepth[1] * wk;
    let clearance_rate = vz - depth_rate;
    let normal = normal_force(p, -clearance, -clearance_rate);

    let foot_speed = vy + leg.dreach[0] * wh + leg.dreach[1] * wk;
    let tangential = -(p.friction * normal * (foot_speed / FRICTION_SLIP_SPEED).tanh());

    let r = gait_reference(&p.gait, phi);
    let torque = [
        pd_torque(&p.gait, r.q[0], r.v[0], qh, wh),
        pd_torque(&p.gait, r.q[1], r.v[1], qk, wk),
    ];

    let leg_force = p.leg_stiffness * (leg.depth - p.leg_rest_length) + p.leg_damping * depth_rate;
    let mut joint_acc = [T::zero(); 2];
    for j in 0..2 {
        let generalized = torque[j] - leg_force * leg.ddepth[j] - normal * leg.ddepth[j]
            + tangential * leg.dreach[j];
        joint_acc[j] = generalized / p.joint_inertia;
    }

    HopperForces {
        clearance,
        normal,
        tangential,
        torque,
        acc: [
            normal / p.body_mass - p.gravity,
            tangential / p.body_mass,
            joint_acc[0],
            joint_acc[1],
        ],
    }
}

/// Semi-implicit Euler step of the full state.
pub fn step<T: Real>(p: &HopperParams<T>, x: &[T], dt: f64) -> Vec<T> {
    let f = forces(p, x);
    let mut next = vec![T::zero(); STATE_DIM];
    for k in 0..4 {
        let v = x[4 + k] + f.acc[k] * dt;
        next[4 + k] = v;
        next[k] = x[k] + v * dt;
    }
    next[8] = x[8] + dt;
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_c1() {
        let w = 0.01;
        for x in [-1.0, 0.0, 0.004, 0.01, 0.5] {
            let h = 1e-7;
            let fd = (smooth_ramp(x + h, w) - smooth_ramp(x - h, w)) / (2.0 * h);
            assert!((fd - smooth_ramp_slope(x, w)).abs() < 1e-5, "x = {x}");
        }
        // value and slope continuous at both knots
        assert!((smooth_ramp(w, w) - w / 2.0).abs() < 1e-18);
        assert!((smooth_ramp_slope(w * (1.0 - 1e-12), w) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn step_is_c1() {
        let w = 0.01;
        for x in [0.0, 0.003, w] {
            let h = 1e-8;
            let dl = (smooth_step(x, w) - smooth_step(x - h, w)) / h;
            let dr = (smooth_step(x + h, w) - smooth_step(x, w)) / h;
            assert!((dl - dr).abs() < 1e-3, "x = {x}");
        }
        assert_eq!(smooth_step(w / 2.0, w), 0.5);
    }

    #[test]
    fn airborne_foot_feels_nothing() {
        let p = HopperParams::nominal();
        let x = [2.0, 0.0, 0.1, 0.8, -3.0, 1.0, 0.5, -0.5, 0.0];
        let f = forces(&p, &x);
        assert_eq!(f.normal, 0.0);
        assert_eq!(f.tangential, 0.0);
        assert_eq!(f.acc[0], -p.gravity);
    }

    #[test]
    fn damping_is_never_adhesive() {
        let p = HopperParams::nominal();
        for pen in [1e-4, 3e-3, 0.02] {
            for rate in [-5.0, -0.1, 0.0, 0.1, 5.0] {
                assert!(normal_force(&p, pen, rate) >= 0.0);
            }
        }
    }
}
