//! The experiment subcommands. Each returns the record and tables to write;
//! nothing here touches the filesystem or the thread pool.

use std::time::Instant;

use lyra::lyap::{invariance_study, rollout, spectrum, LyapunovSpectrum};
use lyra::opt::{codesign, eval_loss, HistoryRow};
use rayon::prelude::*;

use crate::config::Experiment;
use crate::error::CliError;
use crate::record::{
    history_csv, sweep_csv, Command, InvarianceSample, InvarianceSummary, OptimizationSummary, ResultRecord,
    SweepRow, SweepSummary,
};
use crate::validate::validation_suite;

/// A finished (or partially finished) run.
#[derive(Debug)]
pub struct Outcome {
    pub record: Option<ResultRecord>,
    /// `(extension, contents)` of tables written next to the record.
    pub tables: Vec<(&'static str, String)>,
    /// Lines for the terminal.
    pub summary: Vec<String>,
    /// Set when the run failed after producing something worth keeping.
    pub error: Option<CliError>,
}

impl Outcome {
    fn done(record: ResultRecord, summary: Vec<String>) -> Self {
        Self {
            record: Some(record),
            tables: Vec::new(),
            summary,
            error: None,
        }
    }

    pub fn into_result(self) -> Result<Self, CliError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

fn base_record(exp: &Experiment, command: Command) -> ResultRecord {
    let mut r = ResultRecord::new(command, &exp.digest, exp.seed(), exp.map.system().as_str(), exp.map.dt());
    r.params = exp
        .map
        .param_names()
        .iter()
        .cloned()
        .zip(exp.map.params().iter().copied())
        .collect();
    r
}

fn fill_spectrum(r: &mut ResultRecord, s: &LyapunovSpectrum) {
    r.steps = Some(s.steps);
    r.estimator = Some(s.estimator);
    r.burn_in = s.burn_in;
    r.exponents_per_step = Some(s.per_step());
    r.l_lambda = Some(s.metric().l_lambda);
    r.l_lambda_per_step = Some(s.metric().per_step(s.dt));
    r.exponents = Some(s.exponents.clone());
    r.trace = Some(s.trace.clone());
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn run_rollout(exp: &Experiment) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let n = exp.steps()?;
    let x0 = exp.initial_state();
    let traj = rollout(&exp.map, &x0, n)?;
    let mut r = base_record(exp, Command::Rollout);
    r.steps = Some(n);
    r.initial_state = Some(x0);
    let summary = traj.summary();
    let lines = vec![format!("{} steps, final state {}", n, fmt_vec(&summary.last))];
    r.trajectory = Some(summary);
    r.wall_time_s = t0.elapsed().as_secs_f64();
    Ok(Outcome::done(r, lines))
}

pub fn run_spectrum(exp: &Experiment) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let n = exp.steps()?;
    let x0 = exp.initial_state();
    let traj = rollout(&exp.map, &x0, n)?;
    let s = spectrum(&traj, exp.estimator(), exp.estimator_options())?;
    let mut r = base_record(exp, Command::Spectrum);
    fill_spectrum(&mut r, &s);
    r.initial_state = Some(x0);
    r.trajectory = Some(traj.summary());
    r.wall_time_s = t0.elapsed().as_secs_f64();
    let lines = vec![
        format!("lambda   = {}", fmt_vec(&s.exponents)),
        format!("L_lambda = {:.9e}", s.metric().l_lambda),
    ];
    Ok(Outcome::done(r, lines))
}

pub fn run_invariance(exp: &Experiment) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let n = exp.steps()?;
    let samples = exp.initial_samples()?;
    let rep = invariance_study(&exp.map, &samples, n, exp.estimator(), exp.estimator_options())?;
    let mut r = base_record(exp, Command::Invariance);
    r.steps = Some(n);
    r.estimator = Some(exp.estimator());
    r.burn_in = exp.config.burn_in;
    let dt = exp.map.dt();
    let summary = InvarianceSummary {
        samples: rep
            .samples
            .iter()
            .map(|s| InvarianceSample {
                initial_state: s.initial_state.clone(),
                exponents: s.spectrum.as_ref().map(|x| x.exponents.clone()),
                l_lambda: s.spectrum.as_ref().map(|x| x.metric().l_lambda),
                error: s.error.clone(),
            })
            .collect(),
        spread: rep.spread.clone(),
        max_spread: rep.max_spread,
        max_spread_per_step: rep.max_spread * dt,
        mean: rep.mean.clone(),
        failures: rep.failures,
    };
    let lines = vec![
        format!("{} samples, {} failed", samples.len(), rep.failures),
        format!("mean lambda = {}", fmt_vec(&rep.mean)),
        format!("spread      = {} (max {:.3e} per step)", fmt_vec(&rep.spread), rep.max_spread * dt),
    ];
    r.invariance = Some(summary);
    r.wall_time_s = t0.elapsed().as_secs_f64();
    Ok(Outcome::done(r, lines))
}

/// Grid points in lexicographic order, first axis outermost.
fn grid(axes: &[(String, Vec<f64>)]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

pub fn sweep_rows(exp: &Experiment) -> Result<Vec<SweepRow>, CliError> {
    let axes = exp.sweep_axes()?;
    let n = exp.steps()?;
    let x0 = exp.initial_state();
    let (est, opts) = (exp.estimator(), exp.estimator_options());
    let points = grid(&axes);
    let rows = points
        .into_par_iter()
        .map(|values| {
            let run = || -> lyra::Result<LyapunovSpectrum> {
                let mut map = exp.map.clone();
                for ((name, _), &v) in axes.iter().zip(&values) {
                    map.set_param(name, v)?;
                }
                spectrum(&rollout(&map, &x0, n)?, est, opts)
            };
            match run() {
                Ok(s) => SweepRow {
                    l_lambda: Some(s.metric().l_lambda),
                    exponents: Some(s.exponents),
                    status: "ok".into(),
                    values,
                },
                Err(e) => SweepRow {
                    values,
                    l_lambda: None,
                    exponents: None,
                    status: e.to_string(),
                },
            }
        })
        .collect();
    Ok(rows)
}

pub fn run_sweep(exp: &Experiment) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let rows = sweep_rows(exp)?;
    let names: Vec<String> = exp.sweep_axes()?.into_iter().map(|(n, _)| n).collect();
    let failures = rows.iter().filter(|r| r.l_lambda.is_none()).count();
    let mut r = base_record(exp, Command::Sweep);
    r.steps = exp.config.steps;
    r.estimator = Some(exp.estimator());
    r.burn_in = exp.config.burn_in;
    r.initial_state = Some(exp.initial_state());
    r.sweep = Some(SweepSummary {
        axes: names.clone(),
        points: rows.len(),
        failures,
        table: None,
    });
    r.wall_time_s = t0.elapsed().as_secs_f64();
    let lines = vec![format!("{} grid points over {}, {} failed", rows.len(), names.join(" x "), failures)];
    let table = sweep_csv(&names, exp.map.state_dim(), &rows);
    Ok(Outcome {
        record: Some(r),
        tables: vec![("csv", table)],
        summary: lines,
        error: None,
    })
}

pub fn run_optimize(exp: &Experiment) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let spec = exp.loss()?;
    let opts = exp.codesign_options()?;
    let x0 = exp.initial_state();
    let theta0 = exp.map.params().to_vec();
    let names: Vec<String> = opts.free.iter().map(|&i| exp.map.param_names()[i].clone()).collect();
    let free_of = |theta: &[f64]| opts.free.iter().map(|&i| theta[i]).collect::<Vec<f64>>();

    let (history, best_theta, best_iteration, best) = if opts.iters == 0 {
        let e = eval_loss(&exp.map, &theta0, &x0, spec)?;
        let row = HistoryRow {
            iteration: 0,
            loss: e.loss,
            best_loss: e.loss,
            l_lambda: e.l_lambda,
            blew_up: e.blew_up,
            theta: theta0.clone(),
        };
        (vec![row], theta0.clone(), 0, e)
    } else {
        match codesign(&exp.map, &theta0, &x0, spec, &opts) {
            Ok(res) => (res.history, res.theta, res.best_iteration, res.best),
            Err(lyra::Error::OptimizationFailed { evaluations, history }) => {
                let table = history_csv(&names, &opts.free, &history);
                return Ok(Outcome {
                    record: None,
                    tables: vec![("history.csv", table)],
                    summary: vec![format!("all {evaluations} evaluations blew up")],
                    error: Some(CliError::Simulation(lyra::Error::OptimizationFailed { evaluations, history })),
                });
            }
            Err(e) => return Err(e.into()),
        }
    };

    let first = &history[0];
    let last = history.last().expect("history has the initial row");
    let summary = OptimizationSummary {
        grad_method: opts.grad_method,
        free: names.clone(),
        iterations: opts.iters,
        initial_loss: first.loss,
        final_loss: last.loss,
        best_loss: best.loss,
        best_iteration,
        initial_l_lambda: first.l_lambda,
        best_l_lambda: best.l_lambda,
        theta_initial: free_of(&theta0),
        theta_best: free_of(&best_theta),
        history: None,
    };
    let lines = vec![
        format!("loss     {:.6e} -> {:.6e} (best at iteration {best_iteration})", first.loss, best.loss),
        format!(
            "L_lambda {} -> {}",
            first.l_lambda.map_or("-".into(), |l| format!("{l:.6e}")),
            best.l_lambda.map_or("-".into(), |l| format!("{l:.6e}"))
        ),
        format!("theta    {} = {}", names.join(", "), fmt_vec(&summary.theta_best)),
    ];
    let mut r = base_record(exp, Command::Optimize);
    r.steps = Some(spec.horizon);
    r.estimator = Some(spec.estimator);
    r.burn_in = spec.burn_in;
    r.initial_state = Some(x0);
    r.l_lambda = best.l_lambda;
    r.loss = Some(best);
    r.optimization = Some(summary);
    r.wall_time_s = t0.elapsed().as_secs_f64();
    let table = history_csv(&names, &opts.free, &history);
    Ok(Outcome {
        record: Some(r),
        tables: vec![("history.csv", table)],
        summary: lines,
        error: None,
    })
}

pub fn run_validate(negative_control: bool, digest: &str, seed: u64) -> Outcome {
    let t0 = Instant::now();
    let report = validation_suite(negative_control, seed);
    let mut r = ResultRecord::new(Command::Validate, digest, seed, "suite", 1.0);
    let lines: Vec<String> = report.checks.iter().map(|c| c.line()).collect();
    let error = (!report.passed()).then(|| {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        CliError::Validation(format!("{} check(s) failed: {}", names.len(), names.join(", ")))
    });
    r.validation = Some(report);
    r.wall_time_s = t0.elapsed().as_secs_f64();
    Outcome {
        record: Some(r),
        tables: Vec::new(),
        summary: lines,
        error,
    }
}
