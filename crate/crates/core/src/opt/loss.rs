use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diffcore::Real;
use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};
use crate::lyap::{rollout, spectrum, Estimator, EstimatorOptions};

/// Loss assigned to parameter vectors whose rollout diverges.
pub const BLOWUP_SENTINEL: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `‖p(x_N) - ref‖²` for the task-space position `p`.
    TargetPosition,
    /// `(Δy / T - ref)²`, average forward speed after burn-in.
    ForwardVelocity,
    /// Mean of `(z_i - ref)²` after burn-in.
    BaseHeight,
    /// Mean of `‖u_i‖²` after burn-in.
    ControlEffort,
}

impl TermKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TermKind::TargetPosition => "target_position",
            TermKind::ForwardVelocity => "forward_velocity",
            TermKind::BaseHeight => "base_height",
            TermKind::ControlEffort => "control_effort",
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTerm {
    pub kind: TermKind,
    #[serde(default)]
    pub reference: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub weight_robustness: f64,
    #[serde(default)]
    pub terms: Vec<TaskTerm>,
    /// Rollout length `N`.
    pub horizon: usize,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default)]
    pub burn_in: usize,
}

fn default_estimator() -> Estimator {
    Estimator::SvdLocal
}

impl LossSpec {
    pub fn validate(&self, map: &TransitionMap) -> Result<()> {
        let bad = |name: &str, reason: String| Error::InvalidParameter {
            name: name.into(),
            reason,
        };
        if !(self.weight_robustness >= 0.0 && self.weight_robustness.is_finite()) {
            return Err(bad("weight_robustness", format!("must be finite and >= 0, got {}", self.weight_robustness)));
        }
        if self.horizon == 0 || self.burn_in >= self.horizon {
            return Err(bad(
                "horizon",
                format!("need horizon > burn_in >= 0, got {} and {}", self.horizon, self.burn_in),
            ));
        }
        let mut active = self.weight_robustness > 0.0;
        let probe = map.default_initial_state();
        for t in &self.terms {
            let name = t.kind.as_str();
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(bad(name, format!("weight must be finite and >= 0, got {}", t.weight)));
            }
            active |= t.weight > 0.0;
            let expected = match t.kind {
                TermKind::TargetPosition => map.position_with(&probe, map.params()).len(),
                TermKind::ForwardVelocity | TermKind::BaseHeight => 1,
                TermKind::ControlEffort => 0,
            };
            if t.reference.len() != expected {
                return Err(bad(
                    name,
                    format!("reference needs {expected} values, got {}", t.reference.len()),
                ));
            }
            let available = match t.kind {
                TermKind::ForwardVelocity => map.progress_index().is_some(),
                TermKind::BaseHeight => map.height_index().is_some(),
                _ => true,
            };
            if !available {
                return Err(bad(name, format!("not defined for system `{}`", map.system())));
            }
        }
        if !active {
            return Err(bad("terms", "at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub kind: TermKind,
    /// Unweighted value.
    pub value: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEval {
    pub loss: f64,
    pub terms: Vec<TermValue>,
    /// `None` when the rollout blew up.
    pub l_lambda: Option<f64>,
    pub blew_up: bool,
    pub detail: Option<String>,
}

/// Unweighted task terms from states `x_0..x_N`.
pub(crate) fn task_terms<T: Real, S: AsRef<[T]>>(
    map: &TransitionMap,
    theta: &[T],
    states: &[S],
    spec: &LossSpec,
) -> Vec<T> {
    let n = states.len() - 1;
    let b = spec.burn_in;
    let last = states[n].as_ref();
    spec.terms
        .iter()
        .map(|t| match t.kind {
            TermKind::TargetPosition => {
                let p = map.position_with(last, theta);
                let mut s = T::zero();
                for (pk, r) in p.iter().zip(&t.reference) {
                    s += (*pk - *r).square();
                }
                s
            }
            TermKind::ForwardVelocity => {
                let k = map.progress_index().expect("validated");
                let span = (n - b) as f64 * map.dt();
                ((last[k] - states[b].as_ref()[k]) / span - t.reference[0]).square()
            }
            TermKind::BaseHeight => {
                let k = map.height_index().expect("validated");
                let mut s = T::zero();
                for x in &states[b..] {
                    s += (x.as_ref()[k] - t.reference[0]).square();
                }
                s / (n - b + 1) as f64
            }
            TermKind::ControlEffort => {
                let mut s = T::zero();
                for x in &states[b..n] {
                    for u in map.control_with(x.as_ref(), theta) {
                        s += u.square();
                    }
                }
                s / (n - b) as f64
            }
        })
        .collect()
}

pub(crate) fn combine<T: Real>(spec: &LossSpec, terms: &[T], l_lambda: T) -> T {
    let mut total = l_lambda * spec.weight_robustness;
    for (t, v) in spec.terms.iter().zip(terms) {
        total += *v * t.weight;
    }
    total
}

/// Errors raised while simulating (as opposed to bad inputs).
pub(crate) fn is_simulation_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::BlowUp { .. } | Error::AtStep { .. } | Error::NumericalDomain(_) | Error::Convergence { .. }
    )
}

pub(crate) fn blown_up(spec: &LossSpec, e: &Error) -> LossEval {
    LossEval {
        loss: BLOWUP_SENTINEL,
        terms: spec
            .terms
            .iter()
            .map(|t| TermValue {
                kind: t.kind,
                value: f64::NAN,
                weighted: f64::NAN,
            })
            .collect(),
        l_lambda: None,
        blew_up: true,
        detail: Some(e.to_string()),
    }
}

/// Roll out `spec.horizon` steps at `theta` and combine the weighted task
/// terms with `weight_robustness · L_λ`. Divergence yields the sentinel loss.
pub fn eval_loss(map: &TransitionMap, theta: &[f64], x0: &[f64], spec: &LossSpec) -> Result<LossEval> {
    spec.validate(map)?;
    map.check_state(x0)?;
    let m = map.clone().with_params(theta.to_vec())?;
    let opts = EstimatorOptions {
        burn_in: spec.burn_in,
        trace_points: 0,
    };
    let run = rollout(&m, x0, spec.horizon).and_then(|t| Ok((spectrum(&t, spec.estimator, opts)?, t)));
    let (spec_l, traj) = match run {
        Ok(v) => v,
        Err(e) if is_simulation_failure(&e) => return Ok(blown_up(spec, &e)),
        Err(e) => return Err(e),
    };
    let states: Vec<&[f64]> = traj.states().collect();
    let values = task_terms(&m, theta, &states, spec);
    let l = spec_l.metric().l_lambda;
    let loss = combine(spec, &values, l);
    if !loss.is_finite() {
        return Ok(blown_up(spec, &Error::domain(format!("loss evaluated to {loss}"))));
    }
    Ok(LossEval {
        loss,
        terms: spec
            .terms
            .iter()
            .zip(&values)
            .map(|(t, &v)| TermValue {
                kind: t.kind,
                value: v,
                weighted: v * t.weight,
            })
            .collect(),
        l_lambda: Some(l),
        blew_up: false,
        detail: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{ManipulatorParams, SystemId};

    use crate::linalg::Matrix;

    fn robustness_only(horizon: usize) -> LossSpec {
        LossSpec {
            weight_robustness: 2.0,
            terms: vec![],
            horizon,
            estimator: Estimator::QrPropagated,
            burn_in: 0,
        }
    }

    #[test]
    fn contracting_linear_map() {
        let m = TransitionMap::linear(Matrix::from_diag(&[0.5])).unwrap();
        let e = eval_loss(&m, m.params(), &[1.0], &robustness_only(10)).unwrap();
        assert!((e.loss - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert!(!e.blew_up);
    }

    #[test]
    fn target_reached_costs_nothing() {
        let p = ManipulatorParams { g: 0.0, ..ManipulatorParams::nominal() };
        let m = TransitionMap::manipulator(p, 1e-3).unwrap();
        let x0 = [p.q_ref[0], p.q_ref[1], 0.0, 0.0];
        let spec = LossSpec {
            weight_robustness: 0.0,
            terms: vec![TaskTerm {
                kind: TermKind::TargetPosition,
                reference: p.x_ref.to_vec(),
                weight: 1.0,
            }],
            horizon: 20,
            estimator: Estimator::SvdLocal,
            burn_in: 0,
        };
        let e = eval_loss(&m, m.params(), &x0, &spec).unwrap();
        assert!(e.loss < 1e-28, "{e:?}");
        assert!(e.l_lambda.unwrap() < 0.0);
    }

    #[test]
    fn blow_up_gives_sentinel() {
        let m = TransitionMap::linear(Matrix::from_diag(&[1e100])).unwrap();
        let e = eval_loss(&m, m.params(), &[1.0], &robustness_only(10)).unwrap();
        assert!(e.blew_up);
        assert_eq!(e.loss, BLOWUP_SENTINEL);
        assert!(e.detail.unwrap().contains("step 3"));
    }

    #[test]
    fn spec_validation() {
        let m = TransitionMap::preset(SystemId::Henon);
        let mut s = robustness_only(10);
        s.weight_robustness = 0.0;
        assert!(s.validate(&m).is_err());
        s.terms.push(TaskTerm {
            kind: TermKind::ForwardVelocity,
            reference: vec![1.0],
            weight: 1.0,
        });
        assert!(s.validate(&m).is_err());
        s.terms[0].kind = TermKind::TargetPosition;
        assert!(s.validate(&m).is_err());
        s.terms[0].reference = vec![0.0, 0.0];
        s.validate(&m).unwrap();
        s.terms[0].weight = -1.0;
        assert!(s.validate(&m).is_err());
    }
}
