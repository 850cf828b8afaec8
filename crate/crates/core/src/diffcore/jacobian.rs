use serde::{Deserialize, Serialize};

use super::{Jet, JetVector, Real};
use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest number of simultaneously seeded directions.
pub const MAX_JET_WIDTH: usize = 32;

/// `∂Φ/∂(·)` at `base_point`; rows index outputs, columns inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianMatrix {
    pub entries: Matrix<f64>,
    pub base_point: Vec<f64>,
}

impl JacobianMatrix {
    pub fn rows(&self) -> usize {
        self.entries.rows()
    }

    pub fn cols(&self) -> usize {
        self.entries.cols()
    }
}

fn check_inputs(map: &TransitionMap, x: &[f64], theta: &[f64]) -> Result<()> {
    if x.len() != map.state_dim() {
        return Err(Error::Dimension {
            what: "state vector length",
            expected: map.state_dim(),
            got: x.len(),
        });
    }
    if theta.len() != map.param_dim() {
        return Err(Error::Dimension {
            what: "parameter vector length",
            expected: map.param_dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

fn finite_or_named(jv: &JetVector, wrt: &str) -> Result<()> {
    if let Some(i) = jv.value.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("next-state component {i} is not finite")));
    }
    if let Some((r, c)) = jv.tangents.first_non_finite() {
        return Err(Error::domain(format!("Jacobian entry ∂x'[{r}]/∂{wrt}[{c}] is not finite")));
    }
    Ok(())
}

fn width_error(n: usize) -> Error {
    Error::Dimension {
        what: "jet width (at most MAX_JET_WIDTH directions)",
        expected: MAX_JET_WIDTH,
        got: n,
    }
}

fn state_jets<const N: usize>(map: &TransitionMap, x: &[f64], theta: &[f64]) -> Result<JetVector> {
    let xs = JetVector::seed::<N>(x, x.len());
    let th: Vec<Jet<f64, N>> = theta.iter().map(|&t| Jet::constant(t)).collect();
    let out = map.step_with(&xs, &th)?;
    Ok(JetVector::from_jets(&out, x.len()))
}

fn param_jets<const N: usize>(map: &TransitionMap, x: &[f64], theta: &[f64]) -> Result<JetVector> {
    let xs: Vec<Jet<f64, N>> = x.iter().map(|&v| Jet::constant(v)).collect();
    let th = JetVector::seed::<N>(theta, theta.len());
    let out = map.step_with(&xs, &th)?;
    Ok(JetVector::from_jets(&out, theta.len()))
}

/// `∂Φ/∂x` at `(x, theta)` by identity-seeded jets.
pub fn jacobian_state(map: &TransitionMap, x: &[f64], theta: &[f64]) -> Result<JacobianMatrix> {
    check_inputs(map, x, theta)?;
    let jv = crate::with_jet_width!(x.len(), W => state_jets::<W>(map, x, theta)?, else return Err(width_error(x.len())));
    finite_or_named(&jv, "x")?;
    Ok(JacobianMatrix {
        entries: jv.tangents,
        base_point: x.to_vec(),
    })
}

/// `∂Φ/∂θ` at `(x, theta)`; columns follow [`TransitionMap::param_names`].
pub fn jacobian_params(map: &TransitionMap, x: &[f64], theta: &[f64]) -> Result<JacobianMatrix> {
    check_inputs(map, x, theta)?;
    let k = theta.len();
    let jv = crate::with_jet_width!(k, W => param_jets::<W>(map, x, theta)?, else return Err(width_error(k)));
    finite_or_named(&jv, "θ")?;
    Ok(JacobianMatrix {
        entries: jv.tangents,
        base_point: x.to_vec(),
    })
}

/// Next state and state Jacobian over an arbitrary scalar `T` using
/// width-`D` inner jets. With `T = Jet<f64, P>` the Jacobian entries carry
/// their own derivatives with respect to `P` outer directions.
pub fn jacobian_state_generic<T: Real, const D: usize>(
    map: &TransitionMap,
    x: &[T],
    theta: &[T],
) -> Result<(Vec<T>, Matrix<T>)> {
    let d = x.len();
    debug_assert!(d <= D);
    let xs: Vec<Jet<T, D>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(v, i))
        .collect();
    let th: Vec<Jet<T, D>> = theta.iter().map(|&t| Jet::constant(t)).collect();
    let out = map.step_with(&xs, &th)?;
    let mut jac = Matrix::<T>::zeros(out.len(), d);
    for (r, o) in out.iter().enumerate() {
        for c in 0..d {
            jac[(r, c)] = o.eps[c];
        }
    }
    Ok((out.iter().map(|o| o.re).collect(), jac))
}
