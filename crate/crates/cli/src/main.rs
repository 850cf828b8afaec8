use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use lyra::lyap::Estimator;
use lyra_cli::config::{Experiment, ExperimentConfig, Overrides};
use lyra_cli::presets::{preset, preset_text, PRESETS};
use lyra_cli::record::{sidecar, write_text, Command};
use lyra_cli::run::{run_invariance, run_optimize, run_rollout, run_spectrum, run_sweep, run_validate, Outcome};
use lyra_cli::CliError;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "lyra", version, about = "Lyapunov-spectrum robustness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML experiment config.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config by name (see `lyra presets`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Result file; tables are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = parse_estimator)]
    estimator: Option<Estimator>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate and summarise the trajectory.
    Rollout,
    /// Lyapunov spectrum and robustness metric of one trajectory.
    Spectrum,
    /// Spectra from seeded random initial states.
    Invariance,
    /// Metric over a grid of one or two parameters.
    Sweep,
    /// Gradient-based co-design of the free parameters.
    Optimize,
    /// Run the built-in numerical checks.
    Validate {
        /// Disable the singular-value floor on a zero matrix; must fail.
        #[arg(long)]
        negative_control: bool,
    },
    /// List presets, or print one.
    Presets { name: Option<String> },
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::from_str(s).map_err(|e| e.to_string())
}

fn load(cli: &Cli) -> Result<Experiment, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => preset(name)?,
        _ => return Err(CliError::config("config", "pass --config <path> or --preset <name>".into())),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        estimator: cli.estimator,
        out: cli.out.clone(),
    });
    Experiment::new(cfg)
}

/// Record at `out`, tables beside it; returns the paths written.
fn write_outcome(outcome: &mut Outcome, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (ext, text) in &outcome.tables {
        let path = sidecar(out, ext);
        write_text(&path, text)?;
        let name = path.display().to_string();
        if let Some(r) = &mut outcome.record {
            if let Some(s) = &mut r.sweep {
                s.table = Some(name.clone());
            }
            if let Some(o) = &mut r.optimization {
                o.history = Some(name.clone());
            }
        }
        written.push(path);
    }
    if let Some(r) = &outcome.record {
        r.write(out)?;
        written.push(out.to_path_buf());
    }
    Ok(written)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let (command, mut outcome, default_out) = match &cli.command {
        Cmd::Presets { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Cmd::Presets { name: Some(name) } => {
            print!("{}", preset_text(name)?);
            return Ok(());
        }
        Cmd::Validate { negative_control } => {
            let seed = cli.seed.unwrap_or(0);
            let key = format!("{{\"command\":\"validate\",\"negative_control\":{negative_control},\"seed\":{seed}}}");
            let digest: String = Sha256::digest(key.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
            (Command::Validate, run_validate(*negative_control, &digest, seed), None)
        }
        cmd => {
            let exp = load(cli)?;
            let (command, outcome) = match cmd {
                Cmd::Rollout => (Command::Rollout, run_rollout(&exp)?),
                Cmd::Spectrum => (Command::Spectrum, run_spectrum(&exp)?),
                Cmd::Invariance => (Command::Invariance, run_invariance(&exp)?),
                Cmd::Sweep => (Command::Sweep, run_sweep(&exp)?),
                Cmd::Optimize => (Command::Optimize, run_optimize(&exp)?),
                Cmd::Validate { .. } | Cmd::Presets { .. } => unreachable!(),
            };
            (command, outcome, exp.config.out.clone())
        }
    };
    for line in &outcome.summary {
        println!("{line}");
    }
    let out = cli
        .out
        .clone()
        .or(default_out)
        .unwrap_or_else(|| PathBuf::from(format!("lyra-{}.json", command.as_str())));
    for path in write_outcome(&mut outcome, &out)? {
        println!("wrote {}", path.display());
    }
    outcome.into_result().map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
