use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::diffcore::{jacobian_state, jacobian_state_generic, Real};
use crate::dynsys::TransitionMap;
use crate::error::{Error, Result};
use crate::linalg::{qr, singular_values, Matrix, DEFAULT_SV_FLOOR};

/// Steps whose Jacobians are formed concurrently before the ordered reduction.
const BLOCK: usize = 2048;

pub const DEFAULT_TRACE_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Per-step singular values of the Gram matrix `JᵀJ`, averaged.
    SvdLocal,
    /// Per-step `log R[j, j]` of `J = QR`, averaged.
    QrLocal,
    /// Orthonormal frame carried through the Jacobian product.
    QrPropagated,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::SvdLocal, Estimator::QrLocal, Estimator::QrPropagated];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::SvdLocal => "svd_local",
            Estimator::QrLocal => "qr_local",
            Estimator::QrPropagated => "qr_propagated",
        }
    }

    fn is_local(self) -> bool {
        !matches!(self, Estimator::QrPropagated)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Estimator::ALL
            .into_iter()
            .find(|e| e.as_str() == norm)
            .ok_or_else(|| Error::InvalidParameter {
                name: "estimator".into(),
                reason: format!("unknown estimator `{s}` (svd_local, qr_local, qr_propagated)"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Leading steps excluded from the average. The propagated frame still
    /// evolves through them.
    pub burn_in: usize,
    /// Approximate number of trace rows kept; the final row is always kept.
    pub trace_points: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            burn_in: 0,
            trace_points: DEFAULT_TRACE_POINTS,
        }
    }
}

/// Running estimate after selected step counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    /// Number of averaged steps at each row.
    pub steps: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// Exponents sorted descending, per unit time.
    pub exponents: Vec<f64>,
    pub trace: SpectrumTrace,
    pub estimator: Estimator,
    /// Total transitions `N`, including burn-in.
    pub steps: usize,
    pub burn_in: usize,
    pub dt: f64,
}

impl LyapunovSpectrum {
    /// Exponents per iteration, `λ Δt`.
    pub fn per_step(&self) -> Vec<f64> {
        self.exponents.iter().map(|l| l * self.dt).collect()
    }

    pub fn metric(&self) -> RobustnessMetric {
        robustness_metric(self)
    }
}

/// Signed sum of the exponents: the log-rate of phase-space volume change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMetric {
    pub l_lambda: f64,
}

impl RobustnessMetric {
    pub fn per_step(&self, dt: f64) -> f64 {
        self.l_lambda * dt
    }
}

pub fn robustness_metric(spec: &LyapunovSpectrum) -> RobustnessMetric {
    RobustnessMetric {
        l_lambda: spec.exponents.iter().sum(),
    }
}

fn floored_ln<T: Real>(x: T) -> T {
    if x.value() > DEFAULT_SV_FLOOR {
        x.ln()
    } else {
        T::cst(DEFAULT_SV_FLOOR.ln())
    }
}

fn sort_desc<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| b.value().total_cmp(&a.value()));
}

fn require_square<T: Real>(estimator: Estimator, j: &Matrix<T>) -> Result<()> {
    if j.is_square() {
        Ok(())
    } else {
        Err(Error::UnsupportedEstimator {
            estimator: estimator.as_str(),
            reason: format!(
                "Jacobian is {}x{}; use svd_local for non-square Jacobians",
                j.rows(),
                j.cols()
            ),
        })
    }
}

/// One step's contribution to a local estimator, sorted descending.
/// `svd_local` returns logs of the Gram singular values, before halving.
fn local_logs<T: Real>(estimator: Estimator, j: &Matrix<T>) -> Result<Vec<T>> {
    let mut logs: Vec<T> = match estimator {
        Estimator::SvdLocal => singular_values(&j.gram())?.into_iter().map(floored_ln).collect(),
        Estimator::QrLocal => {
            require_square(estimator, j)?;
            let f = qr(j)?;
            (0..j.rows()).map(|k| floored_ln(f.r[(k, k)])).collect()
        }
        Estimator::QrPropagated => unreachable!("propagated estimator has no local contribution"),
    };
    sort_desc(&mut logs);
    Ok(logs)
}

/// Ordered reduction shared by the parallel `f64` path and the sequential
/// nested-jet path.
pub(crate) struct Accumulator<T> {
    estimator: Estimator,
    dt: f64,
    burn_in: usize,
    total: usize,
    seen: usize,
    counted: usize,
    frame: Option<Matrix<T>>,
    sums: Vec<T>,
    stride: usize,
    trace: SpectrumTrace,
}

impl<T: Real> Accumulator<T> {
    pub(crate) fn new(estimator: Estimator, dt: f64, steps: usize, opts: EstimatorOptions) -> Result<Self> {
        if opts.burn_in >= steps {
            return Err(Error::InvalidParameter {
                name: "burn_in".into(),
                reason: format!("burn-in {} leaves no steps out of {steps}", opts.burn_in),
            });
        }
        let total = steps - opts.burn_in;
        let stride = if opts.trace_points == 0 {
            usize::MAX
        } else {
            total.div_ceil(opts.trace_points).max(1)
        };
        Ok(Self {
            estimator,
            dt,
            burn_in: opts.burn_in,
            total,
            seen: 0,
            counted: 0,
            frame: None,
            sums: Vec::new(),
            stride,
            trace: SpectrumTrace::default(),
        })
    }

    fn scale(&self) -> f64 {
        let halve = if self.estimator == Estimator::SvdLocal { 2.0 } else { 1.0 };
        halve * self.dt
    }

    fn add(&mut self, logs: &[T]) -> Result<()> {
        if self.sums.is_empty() {
            self.sums = vec![T::zero(); logs.len()];
        } else if self.sums.len() != logs.len() {
            return Err(Error::Dimension {
                what: "exponent count",
                expected: self.sums.len(),
                got: logs.len(),
            });
        }
        for (s, &l) in self.sums.iter_mut().zip(logs) {
            *s += l;
        }
        self.counted += 1;
        if self.counted.is_multiple_of(self.stride) || self.counted == self.total {
            let denom = self.counted as f64 * self.scale();
            let mut row: Vec<f64> = self.sums.iter().map(|s| s.value() / denom).collect();
            row.sort_by(|a, b| b.total_cmp(a));
            self.trace.steps.push(self.counted);
            self.trace.values.push(row);
        }
        Ok(())
    }

    /// Contribution of a local estimator computed elsewhere.
    fn add_local(&mut self, logs: &[T]) -> Result<()> {
        self.seen += 1;
        self.add(logs)
    }

    fn propagate(&mut self, j: &Matrix<T>) -> Result<()> {
        require_square(self.estimator, j)?;
        let moved = match &self.frame {
            Some(q) => j.matmul(q),
            None => j.clone(),
        };
        let f = qr(&moved)?;
        let logs: Vec<T> = (0..j.rows()).map(|k| floored_ln(f.r[(k, k)])).collect();
        self.frame = Some(f.q);
        let step = self.seen;
        self.seen += 1;
        if step >= self.burn_in {
            self.add(&logs)?;
        }
        Ok(())
    }

    /// Feed the Jacobian of step `seen`; local estimators ignore burn-in steps.
    pub(crate) fn push(&mut self, j: &Matrix<T>) -> Result<()> {
        let step = self.seen;
        if self.estimator.is_local() {
            if step < self.burn_in {
                self.seen += 1;
                return Ok(());
            }
            let logs = local_logs(self.estimator, j).map_err(|e| e.at_step(step))?;
            self.add_local(&logs)
        } else {
            self.propagate(j).map_err(|e| e.at_step(step))
        }
    }

    /// Sum of the exponents, using only ordered per-component sums.
    pub(crate) fn sum(&self) -> T {
        let mut s = T::zero();
        for &v in &self.sums {
            s += v;
        }
        s / (self.counted as f64 * self.scale())
    }

    pub(crate) fn finish(self, steps: usize) -> Result<LyapunovSpectrum>
    where
        T: Real,
    {
        if self.counted != self.total {
            return Err(Error::Dimension {
                what: "averaged step count",
                expected: self.total,
                got: self.counted,
            });
        }
        let denom = self.counted as f64 * self.scale();
        let mut exponents: Vec<f64> = self.sums.iter().map(|s| s.value() / denom).collect();
        exponents.sort_by(|a, b| b.total_cmp(a));
        Ok(LyapunovSpectrum {
            exponents,
            trace: self.trace,
            estimator: self.estimator,
            steps,
            burn_in: self.burn_in,
            dt: self.dt,
        })
    }
}

/// Spectrum from an explicit Jacobian sequence, e.g. non-square ones.
pub fn spectrum_from_jacobians(
    jacobians: &[Matrix<f64>],
    dt: f64,
    estimator: Estimator,
    opts: EstimatorOptions,
) -> Result<LyapunovSpectrum> {
    let n = jacobians.len();
    let mut acc = Accumulator::new(estimator, dt, n, opts)?;
    if estimator.is_local() {
        let logs: Vec<Result<Vec<f64>>> = jacobians[opts.burn_in..]
            .par_iter()
            .enumerate()
            .map(|(k, j)| local_logs(estimator, j).map_err(|e| e.at_step(opts.burn_in + k)))
            .collect();
        acc.seen = opts.burn_in;
        for l in logs {
            acc.add_local(&l?)?;
        }
    } else {
        for j in jacobians {
            acc.push(j)?;
        }
    }
    acc.finish(n)
}

/// State Jacobians `dΦ(x_i)` for `i` in `range`, formed concurrently.
pub fn per_step_jacobians(traj: &Trajectory, range: std::ops::Range<usize>) -> Result<Vec<Matrix<f64>>> {
    if range.end > traj.steps() {
        return Err(Error::Dimension {
            what: "Jacobian range end (at most the step count)",
            expected: traj.steps(),
            got: range.end,
        });
    }
    let map = traj.map();
    range
        .into_par_iter()
        .map(|i| {
            jacobian_state(map, traj.state(i), map.params())
                .map(|j| j.entries)
                .map_err(|e| e.at_step(i))
        })
        .collect()
}

/// Estimate the spectrum along `traj` from the Jacobians at `x_0..x_{N-1}`.
pub fn spectrum(traj: &Trajectory, estimator: Estimator, opts: EstimatorOptions) -> Result<LyapunovSpectrum> {
    let n = traj.steps();
    let map = traj.map();
    let mut acc = Accumulator::<f64>::new(estimator, traj.dt(), n, opts)?;
    let start = if estimator.is_local() { opts.burn_in } else { 0 };
    acc.seen = start;
    let mut lo = start;
    while lo < n {
        let hi = (lo + BLOCK).min(n);
        if estimator.is_local() {
            let logs: Vec<Result<Vec<f64>>> = (lo..hi)
                .into_par_iter()
                .map(|i| {
                    jacobian_state(map, traj.state(i), map.params())
                        .and_then(|j| local_logs(estimator, &j.entries))
                        .map_err(|e| e.at_step(i))
                })
                .collect();
            for l in logs {
                acc.add_local(&l?)?;
            }
        } else {
            for j in per_step_jacobians(traj, lo..hi)? {
                acc.push(&j)?;
            }
        }
        lo = hi;
    }
    acc.finish(n)
}

pub fn spectrum_svd_local(traj: &Trajectory) -> Result<LyapunovSpectrum> {
    spectrum(traj, Estimator::SvdLocal, EstimatorOptions::default())
}

pub fn spectrum_qr_local(traj: &Trajectory) -> Result<LyapunovSpectrum> {
    spectrum(traj, Estimator::QrLocal, EstimatorOptions::default())
}

pub fn spectrum_qr_propagated(traj: &Trajectory) -> Result<LyapunovSpectrum> {
    spectrum(traj, Estimator::QrPropagated, EstimatorOptions::default())
}

/// Sequential rollout over an arbitrary scalar with inner jets of width `D`.
/// Returns the states `x_0..x_N` and `L_λ`; with nested jets the result
/// carries exact parameter derivatives.
pub(crate) fn rollout_metric_generic<T: Real, const D: usize>(
    map: &TransitionMap,
    x0: &[T],
    theta: &[T],
    n: usize,
    estimator: Estimator,
    burn_in: usize,
) -> Result<(Vec<Vec<T>>, T)> {
    let opts = EstimatorOptions {
        burn_in,
        trace_points: 0,
    };
    let mut acc = Accumulator::<T>::new(estimator, map.dt(), n, opts)?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.to_vec());
    for i in 0..n {
        let (next, jac) = jacobian_state_generic::<T, D>(map, &states[i], theta).map_err(|e| e.at_step(i))?;
        if let Some(k) = next.iter().position(|v| !v.all_finite()) {
            return Err(Error::BlowUp {
                step: i,
                detail: format!("component {k} of the next state is not finite"),
            });
        }
        acc.push(&jac)?;
        states.push(next);
    }
    Ok((states, acc.sum()))
}
