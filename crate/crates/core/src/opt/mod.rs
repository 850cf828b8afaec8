//! Composite task + robustness loss, Adam with box projection, and the
//! co-design loop.

mod adam;
mod codesign;
mod loss;

pub use adam::{adam_step, AdamConfig, Bounds, OptimizerState};
pub use codesign::{codesign, CodesignOptions, CodesignResult, GradMethod, HistoryRow, Objective};
pub use loss::{eval_loss, LossEval, LossSpec, TaskTerm, TermKind, TermValue, BLOWUP_SENTINEL};
