//! Configurations shipped with the binary, selectable with `--preset`.

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const PRESETS: [(&str, &str); 8] = [
    ("vanderpol", include_str!("../presets/vanderpol.toml")),
    ("logistic", include_str!("../presets/logistic.toml")),
    ("henon", include_str!("../presets/henon.toml")),
    ("manipulator-codesign", include_str!("../presets/manipulator-codesign.toml")),
    ("hopper-sweep", include_str!("../presets/hopper-sweep.toml")),
    ("hopper-gait", include_str!("../presets/hopper-gait.toml")),
    ("identity", include_str!("../presets/identity.toml")),
    ("linear", include_str!("../presets/linear.toml")),
];

pub fn preset_text(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::config("preset", format!("unknown preset `{name}` ({})", names.join(", ")))
    })
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_toml(preset_text(name)?)
}
