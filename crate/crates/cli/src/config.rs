//! The versioned JSON envelope read by `--config`.

use anyhow::{bail, Result};
use groundcast::datagen::GenerationSpec;
use groundcast::harness::{ExperimentConfig, GridSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl RunConfigFile {
    pub fn with_generation(spec: GenerationSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generation: Some(spec),
            ..Default::default()
        }
    }

    pub fn with_experiment(config: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: Some(config),
            ..Default::default()
        }
    }

    pub fn with_grid(grid: GridSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: Some(grid),
            ..Default::default()
        }
    }
}

/// Check each field of `section` against a default-filled `T`, so that every
/// bad field is reported rather than only the first.
fn check_section<T: DeserializeOwned + Serialize + Default>(
    name: &str,
    value: &Value,
    problems: &mut Vec<String>,
) {
    let Value::Object(given) = value else {
        problems.push(format!("{name}: expected an object"));
        return;
    };
    let Value::Object(defaults) = serde_json::to_value(T::default()).expect("defaults serialise")
    else {
        unreachable!("config sections are structs");
    };
    for (key, v) in given {
        if !defaults.contains_key(key) {
            let known: Vec<&str> = defaults.keys().map(String::as_str).collect();
            problems.push(format!(
                "{name}.{key}: unknown field (expected one of {})",
                known.join(", ")
            ));
            continue;
        }
        let mut probe: Map<String, Value> = defaults.clone();
        probe.insert(key.clone(), v.clone());
        if let Err(e) = serde_json::from_value::<T>(Value::Object(probe)) {
            problems.push(format!("{name}.{key}: {e}"));
        }
    }
}

/// Parse a config document, listing every schema violation on failure.
pub fn parse_config(text: &str) -> Result<RunConfigFile> {
    let doc: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => bail!("config is not valid JSON: {e}"),
    };
    let Value::Object(top) = &doc else {
        bail!("config must be a JSON object")
    };
    let mut problems = Vec::new();
    match top.get("schema_version") {
        None => problems.push("schema_version: missing (required)".to_string()),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => problems.push(format!(
            "schema_version: unsupported value {v}, expected {SCHEMA_VERSION}"
        )),
        _ => {}
    }
    for (key, value) in top {
        match key.as_str() {
            "schema_version" => {}
            "generation" => check_section::<GenerationSpec>(key, value, &mut problems),
            "experiment" => check_section::<ExperimentConfig>(key, value, &mut problems),
            "grid" => check_section::<GridSpec>(key, value, &mut problems),
            other => problems.push(format!(
                "{other}: unknown field (expected schema_version, generation, experiment, grid)"
            )),
        }
    }
    if let Some(Value::Object(grid)) = top.get("grid") {
        for (key, v) in grid {
            if v.as_array().is_some_and(Vec::is_empty) {
                problems.push(format!("grid.{key}: list is empty"));
            }
        }
        if grid.get("replicates").and_then(Value::as_u64) == Some(0) {
            problems.push("grid.replicates: must be at least 1".to_string());
        }
    }
    if !problems.is_empty() {
        bail!(
            "invalid config ({} problem{}):\n  {}",
            problems.len(),
            if problems.len() == 1 { "" } else { "s" },
            problems.join("\n  ")
        );
    }
    Ok(serde_json::from_value(doc)?)
}

pub fn read_config(path: &std::path::Path) -> Result<RunConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_version_is_required() {
        let err = parse_config(r#"{"grid": {}}"#).unwrap_err().to_string();
        assert!(err.contains("schema_version: missing"), "{err}");
    }

    #[test]
    fn every_bad_field_is_listed() {
        let text = r#"{"schema_version": 1, "grid": {"models": ["arima", "gru"], "lagz": [1], "nodes": "many", "patience": []}}"#;
        let err = parse_config(text).unwrap_err().to_string();
        for needle in ["grid.models", "grid.lagz", "grid.nodes", "grid.patience"] {
            assert!(err.contains(needle), "{needle} missing from {err}");
        }
        assert!(err.contains("4 problems"), "{err}");
    }

    #[test]
    fn valid_documents_parse() {
        let cfg =
            parse_config(r#"{"schema_version": 1, "experiment": {"model": "arima", "lags": 3}}"#)
                .unwrap();
        let e = cfg.experiment.unwrap();
        assert_eq!(e.lags, 3);
        assert!(cfg.grid.is_none());
        let text = serde_json::to_string(&RunConfigFile::with_experiment(e.clone())).unwrap();
        assert_eq!(parse_config(&text).unwrap().experiment.unwrap(), e);
    }
}
