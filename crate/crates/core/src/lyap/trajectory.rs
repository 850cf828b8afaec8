use serde::Serialize;

use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};

/// States `x_0..x_N` of one rollout, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    map: TransitionMap,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Map (with the parameter snapshot) that produced the states.
    pub fn map(&self) -> &TransitionMap {
        &self.map
    }

    pub fn dt(&self) -> f64 {
        self.map.dt()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of transitions `N`.
    pub fn steps(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    /// Number of stored states, `N + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.steps())
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Re-simulate every transition and require bitwise agreement.
    pub fn verify(&self) -> Result<()> {
        for i in 0..self.steps() {
            let next = self.map.step(self.state(i)).map_err(|e| reindex(e, i))?;
            if next.as_slice() != self.state(i + 1) {
                return Err(Error::domain(format!("state {} is not the image of state {i}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        let d = self.dim;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for s in self.states() {
            for k in 0..d {
                min[k] = min[k].min(s[k]);
                max[k] = max[k].max(s[k]);
            }
        }
        TrajectorySummary {
            steps: self.steps(),
            dt: self.dt(),
            initial: self.initial().to_vec(),
            last: self.last().to_vec(),
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub dt: f64,
    pub initial: Vec<f64>,
    pub last: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn reindex(e: Error, step: usize) -> Error {
    match e {
        Error::BlowUp { detail, .. } => Error::BlowUp { step, detail },
        Error::AtStep { source, .. } => Error::AtStep { step, source },
        e => e.at_step(step),
    }
}

/// Iterate the map `n` times from `x0`.
pub fn rollout(map: &TransitionMap, x0: &[f64], n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "steps".into(),
            reason: "rollout needs at least one step".into(),
        });
    }
    map.check_state(x0)?;
    let dim = x0.len();
    let mut data = Vec::with_capacity(dim * (n + 1));
    data.extend_from_slice(x0);
    let mut x = x0.to_vec();
    for i in 0..n {
        x = map.step(&x).map_err(|e| reindex(e, i))?;
        data.extend_from_slice(&x);
    }
    Ok(Trajectory {
        map: map.clone(),
        dim,
        data,
    })
}
