//! Rollouts, spectrum estimators and the robustness metric `L_λ = Σ λ_j`.
//!
//! Per-step work runs concurrently in fixed blocks and is reduced in
//! ascending step order, so estimates do not depend on the worker count.

mod estimators;
mod invariance;
mod trajectory;

pub use estimators::{
    per_step_jacobians, robustness_metric, spectrum, spectrum_from_jacobians, spectrum_qr_local,
    spectrum_qr_propagated, spectrum_svd_local, Estimator, EstimatorOptions, LyapunovSpectrum, RobustnessMetric,
    SpectrumTrace, DEFAULT_TRACE_POINTS,
};
pub use invariance::{invariance_study, InvarianceReport, SampleOutcome};
pub use trajectory::{rollout, Trajectory, TrajectorySummary};

pub(crate) use estimators::rollout_metric_generic;
