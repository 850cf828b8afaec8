use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "adam".into(),
                reason: format!("need lr > 0, beta in [0, 1), eps > 0; got {self:?}"),
            })
        }
    }
}

/// Inclusive box `[lower, upper]` for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
    pub bounds: Vec<Bounds>,
}

impl OptimizerState {
    pub fn new(theta: Vec<f64>, bounds: Vec<Bounds>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        if bounds.len() != theta.len() {
            return Err(Error::Dimension {
                what: "bounds length",
                expected: theta.len(),
                got: bounds.len(),
            });
        }
        for (i, (b, &t)) in bounds.iter().zip(&theta).enumerate() {
            if !(b.lower <= b.upper) {
                return Err(Error::InvalidParameter {
                    name: format!("bounds[{i}]"),
                    reason: format!("lower {} exceeds upper {}", b.lower, b.upper),
                });
            }
            if !t.is_finite() || !b.contains(t) {
                return Err(Error::InvalidParameter {
                    name: format!("theta[{i}]"),
                    reason: format!("{t} lies outside [{}, {}]", b.lower, b.upper),
                });
            }
        }
        let n = theta.len();
        Ok(Self {
            theta,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            config,
            bounds,
        })
    }

    pub fn unbounded(theta: Vec<f64>, config: AdamConfig) -> Result<Self> {
        let b = vec![Bounds::FREE; theta.len()];
        Self::new(theta, b, config)
    }

    /// Drop the moments, keeping `theta` and the hyperparameters.
    pub fn restart(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.step = 0;
    }
}

/// One bias-corrected Adam update followed by projection onto the bounds.
pub fn adam_step(state: &OptimizerState, grad: &[f64]) -> Result<OptimizerState> {
    if grad.len() != state.theta.len() {
        return Err(Error::Dimension {
            what: "gradient length",
            expected: state.theta.len(),
            got: grad.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::domain(format!("gradient component {i} is not finite ({})", grad[i])));
    }
    let c = state.config;
    let mut next = state.clone();
    next.step += 1;
    let t = next.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for i in 0..grad.len() {
        next.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
        next.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        let moved = state.theta[i] - c.lr * m_hat / (v_hat.sqrt() + c.eps);
        next.theta[i] = state.bounds[i].clamp(moved);
    }
    Ok(next)
}
