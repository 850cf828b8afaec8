//! Experiment configuration: the on-disk TOML schema and its validation
//! against the selected system.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use lyra::dynsys::{SystemId, TransitionMap};
use lyra::linalg::Matrix;
use lyra::lyap::{Estimator, EstimatorOptions, DEFAULT_TRACE_POINTS};
use lyra::opt::{AdamConfig, Bounds, CodesignOptions, GradMethod, LossSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of `linear`, `logistic`, `henon`, `vanderpol`, `manipulator2r`, `hopper1d`.
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Overrides of named parameters.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Row-major matrix of a linear map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Transitions `N` for rollout, spectrum, invariance and sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_points: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Either an explicit `state` or a box `lower..upper` sampled with the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub iters: usize,
    #[serde(default = "default_grad_method")]
    pub grad_method: GradMethod,
    /// Names of the parameters the optimizer moves.
    pub free: Vec<String>,
    /// `[lower, upper]` per free parameter; unlisted ones are unbounded.
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

fn default_grad_method() -> GradMethod {
    GradMethod::FdCentral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One or two axes; the grid is their Cartesian product, first axis outermost.
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub estimator: Option<Estimator>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config("config", e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(est) = o.estimator {
            self.estimator = Some(est);
            if let Some(loss) = &mut self.loss {
                loss.estimator = est;
            }
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    /// SHA-256 of the canonical JSON form, excluding the output path.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A config checked against its system, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub map: TransitionMap,
    pub digest: String,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let map = build_map(&config)?;
        let exp = Self {
            digest: config.digest(),
            config,
            map,
        };
        exp.check_initial()?;
        exp.check_run()?;
        if let Some(loss) = &exp.config.loss {
            loss.validate(&exp.map).map_err(|e| CliError::from_core_in("loss", e))?;
        }
        if exp.config.optimizer.is_some() {
            exp.codesign_options()?;
        }
        if exp.config.sweep.is_some() {
            exp.sweep_axes()?;
        }
        Ok(exp)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn estimator(&self) -> Estimator {
        self.config.estimator.unwrap_or(Estimator::QrPropagated)
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            burn_in: self.config.burn_in,
            trace_points: self.config.trace_points.unwrap_or(DEFAULT_TRACE_POINTS),
        }
    }

    pub fn steps(&self) -> Result<usize, CliError> {
        self.config
            .steps
            .ok_or_else(|| CliError::config("steps", "required for this command".into()))
    }

    pub fn loss(&self) -> Result<&LossSpec, CliError> {
        self.config
            .loss
            .as_ref()
            .ok_or_else(|| CliError::config("loss", "required for this command".into()))
    }

    /// The single initial state: explicit, else one draw from the box, else
    /// the system default.
    pub fn initial_state(&self) -> Vec<f64> {
        let init = &self.config.initial;
        if let Some(s) = &init.state {
            return s.clone();
        }
        match (&init.lower, &init.upper) {
            (Some(lo), Some(hi)) => draw(lo, hi, 1, self.seed()).remove(0),
            _ => self.map.default_initial_state(),
        }
    }

    /// Seeded uniform draws from the box (the system's sample region when no
    /// box is given).
    pub fn initial_samples(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let init = &self.config.initial;
        if init.state.is_some() {
            return Err(CliError::config(
                "initial.state",
                "an invariance study needs a lower/upper box, not a single state".into(),
            ));
        }
        let n = init.samples.unwrap_or(DEFAULT_SAMPLES);
        let (lo, hi) = match (&init.lower, &init.upper) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            _ => self.map.sample_region(),
        };
        Ok(draw(&lo, &hi, n, self.seed()))
    }

    pub fn codesign_options(&self) -> Result<CodesignOptions, CliError> {
        let o = self
            .config
            .optimizer
            .as_ref()
            .ok_or_else(|| CliError::config("optimizer", "required for this command".into()))?;
        if o.free.is_empty() {
            return Err(CliError::config("optimizer.free", "list at least one parameter".into()));
        }
        let mut free = Vec::with_capacity(o.free.len());
        let mut bounds = Vec::with_capacity(o.free.len());
        for (k, name) in o.free.iter().enumerate() {
            let key = format!("optimizer.free[{k}]");
            let i = self
                .map
                .param_index(name)
                .ok_or_else(|| CliError::config(&key, format!("`{name}` is not a {} parameter", self.map.system())))?;
            if free.contains(&i) {
                return Err(CliError::config(&key, format!("`{name}` listed twice")));
            }
            free.push(i);
            let b = match o.bounds.get(name) {
                Some(&[lo, hi]) => {
                    if !(lo <= hi) {
                        return Err(CliError::config(
                            &format!("optimizer.bounds.{name}"),
                            format!("need lower <= upper, got [{lo}, {hi}]"),
                        ));
                    }
                    Bounds::new(lo, hi)
                }
                None => Bounds::FREE,
            };
            let start = self.map.params()[i];
            if !b.contains(start) {
                return Err(CliError::config(
                    &format!("optimizer.bounds.{name}"),
                    format!("starting value {start} lies outside [{}, {}]", b.lower, b.upper),
                ));
            }
            bounds.push(b);
        }
        if let Some(name) = o.bounds.keys().find(|n| !o.free.contains(n)) {
            return Err(CliError::config(
                &format!("optimizer.bounds.{name}"),
                "bounds given for a parameter that is not free".into(),
            ));
        }
        let fd_step = o.fd_step.unwrap_or(lyra::diffcore::DEFAULT_FD_STEP);
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(CliError::config("optimizer.fd_step", format!("must be positive, got {fd_step}")));
        }
        let adam = o.adam;
        adam.validate().map_err(|e| CliError::from_core("optimizer.adam", e))?;
        Ok(CodesignOptions {
            iters: o.iters,
            grad_method: o.grad_method,
            free,
            bounds,
            adam,
            fd_step,
        })
    }

    /// Axis names with indices and values, checked against the schema.
    pub fn sweep_axes(&self) -> Result<Vec<(String, Vec<f64>)>, CliError> {
        let s = self
            .config
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::config("sweep", "required for this command".into()))?;
        if s.axes.is_empty() || s.axes.len() > 2 {
            return Err(CliError::config("sweep.axes", format!("need one or two axes, got {}", s.axes.len())));
        }
        let mut out = Vec::new();
        for (k, axis) in s.axes.iter().enumerate() {
            let key = format!("sweep.axes[{k}]");
            let i = self.map.param_index(&axis.param).ok_or_else(|| {
                CliError::config(&format!("{key}.param"), format!("`{}` is not a {} parameter", axis.param, self.map.system()))
            })?;
            if out.iter().any(|(n, _): &(String, Vec<f64>)| n == &axis.param) {
                return Err(CliError::config(&format!("{key}.param"), format!("`{}` swept twice", axis.param)));
            }
            if axis.values.is_empty() {
                return Err(CliError::config(&format!("{key}.values"), "empty".into()));
            }
            for &v in &axis.values {
                let mut probe = self.map.params().to_vec();
                probe[i] = v;
                self.map
                    .validate_params(&probe)
                    .map_err(|e| CliError::from_core(&format!("{key}.values"), e))?;
            }
            out.push((axis.param.clone(), axis.values.clone()));
        }
        Ok(out)
    }

    fn check_initial(&self) -> Result<(), CliError> {
        let init = &self.config.initial;
        let d = self.map.state_dim();
        let len = |key: &str, v: &[f64]| {
            if v.len() != d {
                Err(CliError::config(key, format!("needs {d} values, got {}", v.len())))
            } else if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                Err(CliError::config(key, format!("value {bad} is not finite")))
            } else {
                Ok(())
            }
        };
        match (&init.state, &init.lower, &init.upper) {
            (Some(s), None, None) => len("initial.state", s)?,
            (Some(_), _, _) => {
                return Err(CliError::config("initial", "give either `state` or `lower`/`upper`, not both".into()))
            }
            (None, Some(lo), Some(hi)) => {
                len("initial.lower", lo)?;
                len("initial.upper", hi)?;
                if let Some(k) = (0..d).find(|&k| !(lo[k] < hi[k])) {
                    return Err(CliError::config("initial.upper", format!("component {k} is not above the lower bound")));
                }
            }
            (None, Some(_), None) => return Err(CliError::config("initial.upper", "missing".into())),
            (None, None, Some(_)) => return Err(CliError::config("initial.lower", "missing".into())),
            (None, None, None) => {}
        }
        if init.samples == Some(0) {
            return Err(CliError::config("initial.samples", "must be at least 1".into()));
        }
        Ok(())
    }

    fn check_run(&self) -> Result<(), CliError> {
        if let Some(n) = self.config.steps {
            if n == 0 {
                return Err(CliError::config("steps", "must be at least 1".into()));
            }
            if self.config.burn_in >= n {
                return Err(CliError::config(
                    "burn_in",
                    format!("must be below steps ({n}), got {}", self.config.burn_in),
                ));
            }
        }
        Ok(())
    }
}

fn build_map(cfg: &ExperimentConfig) -> Result<TransitionMap, CliError> {
    let system = SystemId::from_str(&cfg.system).map_err(|e| CliError::from_core("system", e))?;
    let mut map = match (&cfg.matrix, system) {
        (Some(rows), SystemId::Linear) => {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::config("matrix", "must be a non-empty square array of rows".into()));
            }
            TransitionMap::linear(Matrix::from_rows(rows)).map_err(|e| CliError::from_core("matrix", e))?
        }
        (Some(_), _) => return Err(CliError::config("matrix", format!("only linear maps take a matrix, not {system}"))),
        (None, s) => TransitionMap::preset(s),
    };
    for (name, &v) in &cfg.params {
        map.set_param(name, v).map_err(|e| CliError::from_core(&format!("params.{name}"), e))?;
    }
    if let Some(dt) = cfg.dt {
        map = map.with_dt(dt).map_err(|e| CliError::from_core("dt", e))?;
    }
    Ok(map)
}

fn draw(lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| lo.iter().zip(hi).map(|(&a, &b)| rng.random_range(a..b)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Experiment, CliError> {
        Experiment::new(ExperimentConfig::from_toml(text)?)
    }

    #[test]
    fn minimal_config() {
        let e = parse("system = \"henon\"\nsteps = 10\n").unwrap();
        assert_eq!(e.map.params(), &[1.4, 0.3]);
        assert_eq!(e.initial_state(), vec![0.0, 0.0]);
        assert_eq!(e.estimator(), Estimator::QrPropagated);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("system = \"henon\"\nstpes = 10\n").unwrap_err();
        assert!(err.to_string().contains("stpes"), "{err}");
        let err = parse("system = \"henon\"\n[initial]\nstate = [0, 0]\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("system = \"henon\"\n[params]\nc = 1.0\n", "params.c"),
            ("system = \"henon\"\n[initial]\nstate = [1.0]\n", "initial.state"),
            ("system = \"vanderpol\"\ndt = -1.0\n", "dt"),
            ("system = \"henon\"\ndt = 0.1\n", "dt"),
            ("system = \"henon\"\nsteps = 5\nburn_in = 5\n", "burn_in"),
            ("system = \"henon\"\nmatrix = [[1.0]]\n", "matrix"),
            ("system = \"nope\"\n", "system"),
            ("system = \"henon\"\n[sweep]\naxes = [{ param = \"q\", values = [1.0] }]\n", "sweep.axes[0].param"),
        ];
        for (text, key) in cases {
            match parse(text) {
                Err(CliError::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn optimizer_section_is_checked() {
        let base = "system = \"henon\"\n[loss]\nweight_robustness = 1.0\nhorizon = 5\n[optimizer]\niters = 3\n";
        assert!(parse(&format!("{base}free = [\"a\"]\nbounds = {{ a = [1.0, 1.5] }}\n")).is_ok());
        let err = parse(&format!("{base}free = [\"a\"]\nbounds = {{ a = [1.5, 2.0] }}\n")).unwrap_err();
        assert_eq!(err.key(), Some("optimizer.bounds.a"));
        let err = parse(&format!("{base}free = [\"a\"]\nbounds = {{ b = [0.0, 1.0] }}\n")).unwrap_err();
        assert_eq!(err.key(), Some("optimizer.bounds.b"));
        let err = parse(&format!("{base}free = [\"zz\"]\n")).unwrap_err();
        assert_eq!(err.key(), Some("optimizer.free[0]"));
    }

    #[test]
    fn random_initial_state_is_seeded() {
        let text = "system = \"vanderpol\"\nseed = 7\n[initial]\nlower = [-3.0, -3.0]\nupper = [3.0, 3.0]\nsamples = 4\n";
        let a = parse(text).unwrap();
        let b = parse(text).unwrap();
        assert_eq!(a.initial_samples().unwrap(), b.initial_samples().unwrap());
        assert_eq!(a.initial_samples().unwrap().len(), 4);
        assert!(a.initial_samples().unwrap().iter().flatten().all(|v| (-3.0..3.0).contains(v)));
        let mut c = a.config.clone();
        c.seed = 8;
        assert_ne!(Experiment::new(c).unwrap().initial_samples().unwrap(), a.initial_samples().unwrap());
    }

    #[test]
    fn digest_tracks_content_not_output_path() {
        let mut c = ExperimentConfig::from_toml("system = \"logistic\"\nsteps = 10\n").unwrap();
        let d0 = c.digest();
        c.out = Some("x.json".into());
        assert_eq!(c.digest(), d0);
        c.seed = 1;
        assert_ne!(c.digest(), d0);
        assert_eq!(d0.len(), 64);
    }

    #[test]
    fn toml_roundtrip() {
        let c = ExperimentConfig::from_toml(
            "system = \"linear\"\nmatrix = [[2.0, 0.0], [0.0, 0.5]]\nsteps = 3\n[sweep]\naxes = [{ param = \"a0_0\", values = [1.0, 2.0] }]\n",
        )
        .unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
