use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rollout, spectrum, Estimator, EstimatorOptions, LyapunovSpectrum};
use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub initial_state: Vec<f64>,
    pub spectrum: Option<LyapunovSpectrum>,
    /// Why this sample produced no spectrum.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub samples: Vec<SampleOutcome>,
    /// Per-component `max - min` over the successful samples.
    pub spread: Vec<f64>,
    pub max_spread: f64,
    /// Per-component mean over the successful samples.
    pub mean: Vec<f64>,
    pub failures: usize,
}

impl InvarianceReport {
    pub fn spectra(&self) -> impl Iterator<Item = &LyapunovSpectrum> {
        self.samples.iter().filter_map(|s| s.spectrum.as_ref())
    }
}

/// Run the estimator from every initial state and report the dispersion.
/// Failed samples are recorded, not fatal; with no successful sample the
/// study itself fails.
pub fn invariance_study(
    map: &TransitionMap,
    samples: &[Vec<f64>],
    n: usize,
    estimator: Estimator,
    opts: EstimatorOptions,
) -> Result<InvarianceReport> {
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|x0| {
            let res = rollout(map, x0, n).and_then(|t| spectrum(&t, estimator, opts));
            match res {
                Ok(s) => SampleOutcome {
                    initial_state: x0.clone(),
                    spectrum: Some(s),
                    error: None,
                },
                Err(e) => SampleOutcome {
                    initial_state: x0.clone(),
                    spectrum: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let ok: Vec<&LyapunovSpectrum> = outcomes.iter().filter_map(|s| s.spectrum.as_ref()).collect();
    let Some(first) = ok.first() else {
        let reason = outcomes
            .first()
            .and_then(|o| o.error.clone())
            .unwrap_or_else(|| "no initial states given".into());
        return Err(Error::domain(format!("every sample failed; first: {reason}")));
    };
    let d = first.exponents.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut mean = vec![0.0; d];
    for s in &ok {
        for k in 0..d {
            lo[k] = lo[k].min(s.exponents[k]);
            hi[k] = hi[k].max(s.exponents[k]);
            mean[k] += s.exponents[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= ok.len() as f64);
    let spread: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
    let max_spread = spread.iter().cloned().fold(0.0, f64::max);
    let failures = outcomes.len() - ok.len();
    Ok(InvarianceReport {
        samples: outcomes,
        spread,
        max_spread,
        mean,
        failures,
    })
}
