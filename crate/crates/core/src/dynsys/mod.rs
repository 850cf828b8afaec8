//! Catalogue of discrete transition maps `x_{i+1} = Φ(x_i; θ)`.
//!
//! Every system is written once against [`Real`], which is how the same code
//! produces trajectories, exact Jacobians and nested parameter derivatives.
//! Controlled systems close the loop inside the step, so the map is autonomous.

pub mod gait;
pub mod hopper;
pub mod manipulator;
pub mod maps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::Real;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use gait::{gait_reference, GaitParams, GaitReference};
pub use hopper::HopperParams;
pub use manipulator::ManipulatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Linear,
    Logistic,
    Henon,
    Vanderpol,
    Manipulator2r,
    Hopper1d,
}

impl SystemId {
    pub const ALL: [SystemId; 6] = [
        SystemId::Linear,
        SystemId::Logistic,
        SystemId::Henon,
        SystemId::Vanderpol,
        SystemId::Manipulator2r,
        SystemId::Hopper1d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::Linear => "linear",
            SystemId::Logistic => "logistic",
            SystemId::Henon => "henon",
            SystemId::Vanderpol => "vanderpol",
            SystemId::Manipulator2r => "manipulator2r",
            SystemId::Hopper1d => "hopper1d",
        }
    }

    /// Pure maps count time in iterations (Δt = 1).
    pub fn is_pure_map(self) -> bool {
        matches!(self, SystemId::Linear | SystemId::Logistic | SystemId::Henon)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "system".into(),
                reason: format!("unknown system `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Free,
    Positive,
    NonNegative,
}

impl Constraint {
    fn admits(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Constraint::Free => true,
                Constraint::Positive => v > 0.0,
                Constraint::NonNegative => v >= 0.0,
            }
    }
}

/// A discrete system together with its parameter vector and timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMap {
    system: SystemId,
    state_dim: usize,
    params: Vec<f64>,
    names: Vec<String>,
    dt: f64,
}

impl TransitionMap {
    fn build(system: SystemId, state_dim: usize, params: Vec<f64>, names: Vec<String>, dt: f64) -> Result<Self> {
        let map = Self {
            system,
            state_dim,
            params,
            names,
            dt,
        };
        map.validate_params(&map.params)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt".into(),
                reason: format!("timestep must be positive and finite, got {dt}"),
            });
        }
        Ok(map)
    }

    fn static_names(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Default parameters for `system`; linear maps default to the 1x1 identity.
    pub fn preset(system: SystemId) -> Self {
        match system {
            SystemId::Linear => Self::linear(Matrix::identity(1)),
            SystemId::Logistic => Self::logistic(4.0),
            SystemId::Henon => Self::henon(1.4, 0.3),
            SystemId::Vanderpol => Self::vanderpol(2.0, 1e-3),
            SystemId::Manipulator2r => Self::manipulator(ManipulatorParams::nominal(), 1e-3),
            SystemId::Hopper1d => Self::hopper(HopperParams::nominal(), 2e-3),
        }
        .expect("presets are valid")
    }

    /// `x' = A x`; parameters are `A`'s entries named `a{row}_{col}`.
    pub fn linear(a: Matrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                what: "linear map matrix columns",
                expected: a.rows(),
                got: a.cols(),
            });
        }
        let d = a.rows();
        let names = (0..d)
            .flat_map(|r| (0..d).map(move |c| format!("a{r}_{c}")))
            .collect();
        Self::build(SystemId::Linear, d, a.as_slice().to_vec(), names, 1.0)
    }

    pub fn logistic(r: f64) -> Result<Self> {
        Self::build(SystemId::Logistic, 1, vec![r], Self::static_names(&["r"]), 1.0)
    }

    pub fn henon(a: f64, b: f64) -> Result<Self> {
        Self::build(SystemId::Henon, 2, vec![a, b], Self::static_names(&["a", "b"]), 1.0)
    }

    pub fn vanderpol(mu: f64, dt: f64) -> Result<Self> {
        Self::build(SystemId::Vanderpol, 2, vec![mu], Self::static_names(&["mu"]), dt)
    }

    pub fn manipulator(p: ManipulatorParams<f64>, dt: f64) -> Result<Self> {
        Self::build(
            SystemId::Manipulator2r,
            4,
            p.to_vec(),
            Self::static_names(&manipulator::PARAM_NAMES),
            dt,
        )
    }

    pub fn hopper(p: HopperParams<f64>, dt: f64) -> Result<Self> {
        let mut names = Self::static_names(&hopper::BODY_PARAM_NAMES);
        names.extend(Self::static_names(&gait::PARAM_NAMES));
        Self::build(SystemId::Hopper1d, hopper::STATE_DIM, p.to_vec(), names, dt)
    }

    pub fn system(&self) -> SystemId {
        self.system
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn param_dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Canonical parameter order; also the column order of parameter Jacobians.
    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_index(name).map(|i| self.params[i])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if self.system.is_pure_map() && dt != 1.0 {
            return Err(Error::InvalidParameter {
                name: "dt".into(),
                reason: format!("{} is a pure map; its timestep is one iteration", self.system),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt".into(),
                reason: format!("timestep must be positive and finite, got {dt}"),
            });
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.param_index(name).ok_or_else(|| Error::InvalidParameter {
            name: name.into(),
            reason: format!("not a parameter of {}", self.system),
        })?;
        let mut trial = self.params.clone();
        trial[i] = value;
        self.validate_params(&trial)?;
        self.params = trial;
        Ok(())
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        self.set_param(name, value)?;
        Ok(self)
    }

    pub fn with_params(mut self, theta: Vec<f64>) -> Result<Self> {
        self.validate_params(&theta)?;
        self.params = theta;
        Ok(self)
    }

    pub fn constraint(&self, index: usize) -> Constraint {
        use Constraint::*;
        match self.system {
            SystemId::Linear | SystemId::Logistic | SystemId::Henon | SystemId::Vanderpol => Free,
            SystemId::Manipulator2r => match index {
                0..=3 => Positive,
                4..=9 | 15 => NonNegative,
                _ => Free,
            },
            SystemId::Hopper1d => match index {
                0 | 1 | 2 | 4 | 6 | 7 => Positive,
                3 | 5 | 8 => NonNegative,
                // f0, f1, kp, kd
                12 | 13 | 17 | 18 => NonNegative,
                _ => Free,
            },
        }
    }

    pub fn validate_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.names.len() {
            return Err(Error::Dimension {
                what: "parameter vector length",
                expected: self.names.len(),
                got: theta.len(),
            });
        }
        for (i, &v) in theta.iter().enumerate() {
            let c = self.constraint(i);
            if !c.admits(v) {
                return Err(Error::InvalidParameter {
                    name: self.names[i].clone(),
                    reason: format!("value {v} violates {c:?} constraint"),
                });
            }
        }
        Ok(())
    }

    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state vector length",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("state component {i} is not finite")));
        }
        Ok(())
    }

    /// One step at the map's own parameters.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let next = self.step_with(x, &self.params).map_err(|e| e.at_step(0))?;
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: 0,
                detail: format!("component {i} of the next state is not finite"),
            });
        }
        Ok(next)
    }

    /// Generic step at arbitrary `theta`; performs no shape or finiteness checks.
    pub fn step_with<T: Real>(&self, x: &[T], theta: &[T]) -> Result<Vec<T>> {
        Ok(match self.system {
            SystemId::Linear => maps::linear(x, theta),
            SystemId::Logistic => maps::logistic(x, theta),
            SystemId::Henon => maps::henon(x, theta),
            SystemId::Vanderpol => maps::vanderpol(x, theta, self.dt),
            SystemId::Manipulator2r => {
                let p = ManipulatorParams::from_slice(theta);
                let (q, v) = manipulator::step(&p, [x[0], x[1]], [x[2], x[3]], self.dt)?;
                vec![q[0], q[1], v[0], v[1]]
            }
            SystemId::Hopper1d => hopper::step(&HopperParams::from_slice(theta), x, self.dt),
        })
    }

    /// Control torques applied at state `x` (empty for uncontrolled systems).
    pub fn control_with<T: Real>(&self, x: &[T], theta: &[T]) -> Vec<T> {
        match self.system {
            SystemId::Manipulator2r => {
                let p = ManipulatorParams::from_slice(theta);
                manipulator::control(&p, [x[0], x[1]], [x[2], x[3]]).to_vec()
            }
            SystemId::Hopper1d => hopper::forces(&HopperParams::from_slice(theta), x).torque.to_vec(),
            _ => Vec::new(),
        }
    }

    /// Task-space position: end effector for the arm, `(y, z)` of the hopper
    /// body, and the state itself otherwise.
    pub fn position_with<T: Real>(&self, x: &[T], theta: &[T]) -> Vec<T> {
        match self.system {
            SystemId::Manipulator2r => {
                let p = ManipulatorParams::from_slice(theta);
                manipulator::forward_kinematics(&p, [x[0], x[1]]).to_vec()
            }
            SystemId::Hopper1d => vec![x[1], x[0]],
            _ => x.to_vec(),
        }
    }

    /// Index of the base-height coordinate, where one exists.
    pub fn height_index(&self) -> Option<usize> {
        (self.system == SystemId::Hopper1d).then_some(0)
    }

    /// Index of the forward-progress coordinate, where one exists.
    pub fn progress_index(&self) -> Option<usize> {
        (self.system == SystemId::Hopper1d).then_some(1)
    }

    pub fn default_initial_state(&self) -> Vec<f64> {
        match self.system {
            SystemId::Linear => vec![1.0; self.state_dim],
            SystemId::Logistic => vec![0.3],
            SystemId::Henon => vec![0.0, 0.0],
            SystemId::Vanderpol => vec![2.0, 0.0],
            SystemId::Manipulator2r => vec![-std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0],
            SystemId::Hopper1d => vec![0.5, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    /// Box of states on which the map is declared valid, used for random
    /// Jacobian audits.
    pub fn sample_region(&self) -> (Vec<f64>, Vec<f64>) {
        use std::f64::consts::PI;
        match self.system {
            SystemId::Linear => (vec![-2.0; self.state_dim], vec![2.0; self.state_dim]),
            SystemId::Logistic => (vec![0.0], vec![1.0]),
            SystemId::Henon => (vec![-1.5, -0.4], vec![1.5, 0.4]),
            SystemId::Vanderpol => (vec![-3.0, -3.0], vec![3.0, 3.0]),
            SystemId::Manipulator2r => (vec![-PI, -PI, -2.0, -2.0], vec![PI, PI, 2.0, 2.0]),
            SystemId::Hopper1d => (
                vec![0.3, -1.0, -0.5, 0.2, -1.0, -1.0, -1.0, -1.0, 0.0],
                vec![0.6, 1.0, 0.5, 1.2, 1.0, 1.0, 1.0, 1.0, 2.0],
            ),
        }
    }
}
