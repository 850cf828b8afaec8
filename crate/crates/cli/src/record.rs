//! Result files: one JSON record per run plus CSV tables for sweeps and
//! optimization histories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lyra::lyap::{Estimator, SpectrumTrace, TrajectorySummary};
use lyra::opt::{GradMethod, HistoryRow, LossEval};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const VERSION: &str = concat!("lyra ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Rollout,
    Spectrum,
    Invariance,
    Sweep,
    Optimize,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Rollout => "rollout",
            Command::Spectrum => "spectrum",
            Command::Invariance => "invariance",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub version: String,
    pub command: Command,
    pub config_digest: String,
    pub seed: u64,
    pub system: String,
    pub dt: f64,
    #[serde(default)]
    pub params: Vec<(String, f64)>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub estimator: Option<Estimator>,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    /// Exponents per unit time, descending.
    #[serde(default)]
    pub exponents: Option<Vec<f64>>,
    #[serde(default)]
    pub exponents_per_step: Option<Vec<f64>>,
    #[serde(default)]
    pub l_lambda: Option<f64>,
    #[serde(default)]
    pub l_lambda_per_step: Option<f64>,
    #[serde(default)]
    pub trace: Option<SpectrumTrace>,
    #[serde(default)]
    pub trajectory: Option<TrajectorySummary>,
    #[serde(default)]
    pub invariance: Option<InvarianceSummary>,
    #[serde(default)]
    pub sweep: Option<SweepSummary>,
    #[serde(default)]
    pub optimization: Option<OptimizationSummary>,
    /// Per-term loss diagnostics (the best iterate for `optimize`).
    #[serde(default)]
    pub loss: Option<LossEval>,
    #[serde(default)]
    pub validation: Option<ValidationReport>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceSample {
    pub initial_state: Vec<f64>,
    pub exponents: Option<Vec<f64>>,
    pub l_lambda: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceSummary {
    pub samples: Vec<InvarianceSample>,
    /// Per-component `max - min`, per unit time.
    pub spread: Vec<f64>,
    pub max_spread: f64,
    pub max_spread_per_step: f64,
    pub mean: Vec<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSummary {
    pub axes: Vec<String>,
    pub points: usize,
    pub failures: usize,
    pub table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSummary {
    pub grad_method: GradMethod,
    pub free: Vec<String>,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub initial_l_lambda: Option<f64>,
    pub best_l_lambda: Option<f64>,
    pub theta_initial: Vec<f64>,
    pub theta_best: Vec<f64>,
    pub history: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured <= tolerance`; NaN fails.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<40} measured {:.6e}  tolerance {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl ResultRecord {
    pub fn new(command: Command, digest: &str, seed: u64, system: &str, dt: f64) -> Self {
        Self {
            version: VERSION.to_string(),
            command,
            config_digest: digest.to_string(),
            seed,
            system: system.to_string(),
            dt,
            params: Vec::new(),
            steps: None,
            estimator: None,
            burn_in: 0,
            initial_state: None,
            exponents: None,
            exponents_per_step: None,
            l_lambda: None,
            l_lambda_per_step: None,
            trace: None,
            trajectory: None,
            invariance: None,
            sweep: None,
            optimization: None,
            loss: None,
            validation: None,
            wall_time_s: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let r: Self = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("record does not parse: {e}")))?;
        r.validate()?;
        Ok(r)
    }

    /// Internal consistency of a parsed record.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.config_digest.len() != 64 || !self.config_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return bad(format!("config digest `{}` is not a sha256 hex string", self.config_digest));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt {} is not positive", self.dt));
        }
        if let Some(ex) = &self.exponents {
            if ex.windows(2).any(|w| w[0] < w[1]) {
                return bad("exponents are not sorted descending".into());
            }
            let sum: f64 = ex.iter().sum();
            let scale = 1.0 + ex.iter().map(|e| e.abs()).sum::<f64>();
            if !self.l_lambda.is_some_and(|l| (l - sum).abs() <= 1e-12 * scale) {
                return bad(format!("l_lambda {:?} differs from the exponent sum {sum}", self.l_lambda));
            }
            if let Some(ps) = &self.exponents_per_step {
                if ps.len() != ex.len() || ps.iter().zip(ex).any(|(p, e)| (p - e * self.dt).abs() > 1e-12 * (1.0 + p.abs())) {
                    return bad("exponents_per_step differ from exponents * dt".into());
                }
            }
        }
        Ok(())
    }

    /// The record with run-dependent timing removed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &self.to_json())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    if !text.ends_with('\n') {
        f.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

/// `path` with its extension replaced, `runs/x.json` -> `runs/x.<ext>`.
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub l_lambda: Option<f64>,
    pub exponents: Option<Vec<f64>>,
    /// `ok`, or the error that stopped this point.
    pub status: String,
}

pub fn sweep_csv(axes: &[String], dim: usize, rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = axes.to_vec();
    header.push("l_lambda".into());
    header.extend((1..=dim).map(|k| format!("lambda_{k}")));
    header.push("status".into());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec: Vec<String> = r.values.iter().map(|&v| fmt_f64(v)).collect();
        rec.push(fmt_opt(r.l_lambda));
        match &r.exponents {
            Some(ex) => rec.extend(ex.iter().map(|&v| fmt_f64(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        rec.push(r.status.clone());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn history_csv(names: &[String], free: &[usize], rows: &[HistoryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["iteration", "loss", "best_loss", "l_lambda", "blew_up"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.iteration.to_string(),
            fmt_f64(r.loss),
            fmt_f64(r.best_loss),
            fmt_opt(r.l_lambda),
            r.blew_up.to_string(),
        ];
        rec.extend(free.iter().map(|&i| fmt_f64(r.theta[i])));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
