//! Run configuration: one TOML file with `[synth]`, `[model]`, `[train]`
//! and `[eval]` sections, plus dotted-key command-line overrides
//! (`--set train.epochs=5`). Unknown keys are rejected and the effective
//! config is echoed into every output directory, so a run can be reproduced
//! from its echo alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use salad_core::datagen::SynthConfig;
use salad_core::evaluation::{THRESHOLDS_DENSE, THRESHOLDS_SPARSE};
use salad_core::model::ModelConfig;
use salad_core::trainer::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Named threshold preset: `thumos` (0.1..0.5) or `anet`
    /// (0.5, 0.75, 0.95).
    pub preset: Option<String>,
    /// Explicit thresholds; takes precedence over the preset.
    pub thresholds: Option<Vec<f64>>,
}

impl EvalSection {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        if let Some(t) = &self.thresholds {
            if t.is_empty() {
                return Err(CliError::config("eval.thresholds must be nonempty"));
            }
            return Ok(t.clone());
        }
        match self.preset.as_deref() {
            None | Some("thumos") => Ok(THRESHOLDS_DENSE.to_vec()),
            Some("anet") => Ok(THRESHOLDS_SPARSE.to_vec()),
            Some(other) => Err(CliError::config(format!(
                "unknown eval preset '{other}' (known: thumos, anet)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: Option<SynthConfig>,
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn synth(&self) -> Result<&SynthConfig, CliError> {
        self.synth
            .as_ref()
            .ok_or_else(|| CliError::config("config is missing the [synth] section"))
    }

    pub fn model(&self) -> Result<ModelConfig, CliError> {
        let mut model = self
            .model
            .clone()
            .ok_or_else(|| CliError::config("config is missing the [model] section"))?;
        model.fill_default_widths();
        Ok(model)
    }

    pub fn echo_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))
    }
}

/// Applies one `path.to.key=value` override to a parsed TOML table. The
/// value is parsed as a TOML literal where possible, falling back to a
/// plain string.
fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{spec}' is not of the form key=value")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw_value}"))
        .map(|mut t| t.remove("v").expect("parsed"))
        .unwrap_or_else(|_| toml::Value::String(raw_value.to_string()));

    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("override '{spec}' has an empty key segment")));
    }
    let mut table = root;
    for key in &keys[..keys.len() - 1] {
        table = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::config(format!("override '{spec}': '{key}' is not a table"))
            })?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Loads the config file and applies the overrides, validating everything
/// up front.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text)
        .map_err(|e| CliError::config(format!("malformed config: {e}")))?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::config(format!("invalid config: {e}")))?;
    if let Some(synth) = &config.synth {
        synth.validate().map_err(CliError::from)?;
    }
    if let Some(model) = &config.model {
        model.validate().map_err(CliError::from)?;
    }
    config.train.validate().map_err(CliError::from)?;
    config.eval.resolve()?;
    Ok(config)
}
