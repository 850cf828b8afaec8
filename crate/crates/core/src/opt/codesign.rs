use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, Bounds, OptimizerState};
use super::loss::{blown_up, combine, eval_loss, is_simulation_failure, task_terms, LossEval, LossSpec};
use crate::diffcore::{grad_scalar_fd, Jet, DEFAULT_FD_STEP};
use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};
use crate::lyap::rollout_metric_generic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMethod {
    /// Central differences of the scalar loss.
    FdCentral,
    /// Jets of jets: exact derivatives of the discretised loss.
    NestedJets,
}

impl GradMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GradMethod::FdCentral => "fd_central",
            GradMethod::NestedJets => "nested_jets",
        }
    }
}

impl fmt::Display for GradMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GradMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "fd_central" => Ok(GradMethod::FdCentral),
            "nested_jets" => Ok(GradMethod::NestedJets),
            _ => Err(Error::InvalidParameter {
                name: "grad_method".into(),
                reason: format!("unknown gradient method `{s}` (fd_central, nested_jets)"),
            }),
        }
    }
}

/// Loss of the full parameter vector where only `free` entries vary.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub map: &'a TransitionMap,
    pub theta: &'a [f64],
    pub x0: &'a [f64],
    pub spec: &'a LossSpec,
    pub free: &'a [usize],
}

impl Objective<'_> {
    fn check(&self) -> Result<()> {
        self.spec.validate(self.map)?;
        self.map.validate_params(self.theta)?;
        self.map.check_state(self.x0)?;
        for &i in self.free {
            if i >= self.map.param_dim() {
                return Err(Error::Dimension {
                    what: "free parameter index (below the parameter count)",
                    expected: self.map.param_dim(),
                    got: i,
                });
            }
        }
        Ok(())
    }

    pub fn assemble(&self, free_values: &[f64]) -> Vec<f64> {
        let mut full = self.theta.to_vec();
        for (&i, &v) in self.free.iter().zip(free_values) {
            full[i] = v;
        }
        full
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.theta[i]).collect()
    }

    pub fn eval(&self, free_values: &[f64]) -> Result<LossEval> {
        eval_loss(self.map, &self.assemble(free_values), self.x0, self.spec)
    }

    /// Gradient with respect to the free entries, with the loss at the point.
    pub fn gradient(&self, free_values: &[f64], method: GradMethod, fd_step: f64) -> Result<(LossEval, Vec<f64>)> {
        match method {
            GradMethod::FdCentral => {
                let at = self.eval(free_values)?;
                let g = grad_scalar_fd(|f| self.eval(f).map_or(f64::NAN, |e| e.loss), free_values, fd_step)?;
                Ok((at, g))
            }
            GradMethod::NestedJets => {
                let p = self.free.len();
                let d = self.map.state_dim();
                let too_wide = || Error::InvalidParameter {
                    name: "free".into(),
                    reason: format!("nested jets support at most 16 free parameters, got {p}"),
                };
                crate::with_nested_width!(p, P => crate::with_nested_width!(d, D => self.nested::<P, D>(free_values), else Err(too_wide())), else Err(too_wide()))
            }
        }
    }

    fn nested<const P: usize, const D: usize>(&self, free_values: &[f64]) -> Result<(LossEval, Vec<f64>)> {
        let full = self.assemble(free_values);
        self.map.validate_params(&full)?;
        let mut theta: Vec<Jet<f64, P>> = full.iter().map(|&t| Jet::constant(t)).collect();
        for (k, &i) in self.free.iter().enumerate() {
            theta[i] = Jet::variable(full[i], k);
        }
        let x0: Vec<Jet<f64, P>> = self.x0.iter().map(|&v| Jet::constant(v)).collect();
        let run = rollout_metric_generic::<Jet<f64, P>, D>(
            self.map,
            &x0,
            &theta,
            self.spec.horizon,
            self.spec.estimator,
            self.spec.burn_in,
        );
        let (states, l) = match run {
            Ok(v) => v,
            Err(e) if is_simulation_failure(&e) => return Ok((blown_up(self.spec, &e), vec![0.0; self.free.len()])),
            Err(e) => return Err(e),
        };
        let terms = task_terms(self.map, &theta, &states, self.spec);
        let total = combine(self.spec, &terms, l);
        let eval = LossEval {
            loss: total.re,
            terms: self
                .spec
                .terms
                .iter()
                .zip(&terms)
                .map(|(t, v)| super::TermValue {
                    kind: t.kind,
                    value: v.re,
                    weighted: v.re * t.weight,
                })
                .collect(),
            l_lambda: Some(l.re),
            blew_up: false,
            detail: None,
        };
        if !total.re.is_finite() || total.eps.iter().any(|g| !g.is_finite()) {
            return Ok((blown_up(self.spec, &Error::domain("nested loss is not finite")), vec![0.0; self.free.len()]));
        }
        Ok((eval, total.eps[..self.free.len()].to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodesignOptions {
    pub iters: usize,
    pub grad_method: GradMethod,
    /// Indices into the map's parameter vector that the optimizer moves.
    pub free: Vec<usize>,
    /// One box per free index.
    pub bounds: Vec<Bounds>,
    pub adam: AdamConfig,
    pub fd_step: f64,
}

impl CodesignOptions {
    pub fn new(free: Vec<usize>, bounds: Vec<Bounds>, iters: usize) -> Self {
        Self {
            iters,
            grad_method: GradMethod::FdCentral,
            free,
            bounds,
            adam: AdamConfig::default(),
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Row `k` is the evaluation at the `k`-th iterate; row 0 is the start.
    pub iteration: usize,
    pub loss: f64,
    pub best_loss: f64,
    pub l_lambda: Option<f64>,
    pub blew_up: bool,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodesignResult {
    /// Best full parameter vector seen.
    pub theta: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub best: LossEval,
    pub history: Vec<HistoryRow>,
}

/// Adam on the free parameters, returning the best iterate seen.
///
/// After a diverging iterate the loop returns to the best point with reset
/// moments and half the learning rate.
pub fn codesign(
    map: &TransitionMap,
    theta0: &[f64],
    x0: &[f64],
    spec: &LossSpec,
    opts: &CodesignOptions,
) -> Result<CodesignResult> {
    if opts.iters == 0 {
        return Err(Error::InvalidParameter {
            name: "iters".into(),
            reason: "co-design needs at least one iteration".into(),
        });
    }
    let obj = Objective {
        map,
        theta: theta0,
        x0,
        spec,
        free: &opts.free,
    };
    obj.check()?;
    let mut state = OptimizerState::new(obj.free_values(), opts.bounds.clone(), opts.adam)?;

    let mut history = Vec::with_capacity(opts.iters + 1);
    let mut best: Option<(f64, usize, Vec<f64>, LossEval)> = None;
    for k in 0..=opts.iters {
        let (eval, grad) = if k < opts.iters {
            obj.gradient(&state.theta, opts.grad_method, opts.fd_step)?
        } else {
            (obj.eval(&state.theta)?, Vec::new())
        };
        if !eval.blew_up && best.as_ref().is_none_or(|b| eval.loss < b.0) {
            best = Some((eval.loss, k, state.theta.clone(), eval.clone()));
        }
        history.push(HistoryRow {
            iteration: k,
            loss: eval.loss,
            best_loss: best.as_ref().map_or(eval.loss, |b| b.0),
            l_lambda: eval.l_lambda,
            blew_up: eval.blew_up,
            theta: obj.assemble(&state.theta),
        });
        if k == opts.iters {
            break;
        }
        if eval.blew_up {
            if let Some(b) = &best {
                state.theta = b.2.clone();
            }
            state.restart();
            state.config.lr *= 0.5;
            continue;
        }
        state = adam_step(&state, &grad)?;
    }

    match best {
        Some((best_loss, best_iteration, free_values, eval)) => Ok(CodesignResult {
            theta: obj.assemble(&free_values),
            best_loss,
            best_iteration,
            best: eval,
            history,
        }),
        None => Err(Error::OptimizationFailed {
            evaluations: history.len(),
            history,
        }),
    }
}
