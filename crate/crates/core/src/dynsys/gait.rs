//! Sinusoidal gait references tracked by a joint PD law.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::diffcore::Real;

pub const PARAM_NAMES: [&str; 11] = [
    "a0", "a1", "f0", "f1", "p0", "p1", "delta", "kp", "kd", "q_ref_hip", "q_ref_knee",
];

/// Shared amplitudes, frequencies and phases for the hip (`*0`) and knee
/// (`*1`) joint families; `delta` offsets the opposing leg pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams<T> {
    pub a0: T,
    pub a1: T,
    pub f0: T,
    pub f1: T,
    pub p0: T,
    pub p1: T,
    pub delta: T,
    pub kp: T,
    pub kd: T,
    pub q_ref_hip: T,
    pub q_ref_knee: T,
}

impl<T: Real> GaitParams<T> {
    pub fn from_slice(theta: &[T]) -> Self {
        Self {
            a0: theta[0],
            a1: theta[1],
            f0: theta[2],
            f1: theta[3],
            p0: theta[4],
            p1: theta[5],
            delta: theta[6],
            kp: theta[7],
            kd: theta[8],
            q_ref_hip: theta[9],
            q_ref_knee: theta[10],
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![
            self.a0, self.a1, self.f0, self.f1, self.p0, self.p1, self.delta, self.kp, self.kd,
            self.q_ref_hip, self.q_ref_knee,
        ]
    }
}

/// Joint references for both leg pairs, ordered
/// `[hip (FR, RL), knee (FR, RL), hip (FL, RR), knee (FL, RR)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitReference<T> {
    pub q: [T; 4],
    pub v: [T; 4],
}

fn wave<T: Real>(offset: T, amp: T, freq: T, phase: T, t: T) -> (T, T) {
    let omega = freq * TAU;
    let (s, c) = (omega * t + phase).sin_cos();
    (offset + amp * s, amp * omega * c)
}

pub fn gait_reference<T: Real>(g: &GaitParams<T>, t: T) -> GaitReference<T> {
    let (hip_a, dhip_a) = wave(g.q_ref_hip, g.a0, g.f0, g.p0, t);
    let (knee_a, dknee_a) = wave(g.q_ref_knee, g.a1, g.f1, g.p1, t);
    let (hip_b, dhip_b) = wave(g.q_ref_hip, g.a0, g.f0, g.p0 + g.delta, t);
    let (knee_b, dknee_b) = wave(g.q_ref_knee, g.a1, g.f1, g.p1 + g.delta, t);
    GaitReference {
        q: [hip_a, knee_a, hip_b, knee_b],
        v: [dhip_a, dknee_a, dhip_b, dknee_b],
    }
}

/// `u = kp (q_ref(t) - q) + kd (q̇_ref(t) - q̇)` per joint.
pub fn pd_torque<T: Real>(g: &GaitParams<T>, q_ref: T, v_ref: T, q: T, v: T) -> T {
    g.kp * (q_ref - q) + g.kd * (v_ref - v)
}
