use std::path::Path;

use serde_json::Value;

use super::CliError;
use crate::harness::ExperimentConfig;

/// Sets `value` at a dotted `path`, creating intermediate objects.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key `{path}` has an empty segment")));
    }
    let mut cur = root;
    for (i, key) in keys.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override `{path}`: `{}` is not an object",
                keys[..i].join(".")
            ))
        })?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("keys is non-empty")
}

/// Applies a `key=value` override. The value is read as JSON when it parses
/// as JSON, and as a plain string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, key.trim(), value)
}

/// For serde's "unknown field `x`, expected one of `a`, `b`" messages, the
/// closest expected name.
fn suggestion(message: &str) -> Option<String> {
    if !message.starts_with("unknown field") && !message.starts_with("unknown variant") {
        return None;
    }
    let quoted: Vec<&str> = message.split('`').skip(1).step_by(2).collect();
    let (unknown, expected) = quoted.split_first()?;
    expected
        .iter()
        .map(|c| (strsim::levenshtein(unknown, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

/// Parses a JSON config, applies overrides in order, fills defaults and validates.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut root: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    if !root.is_object() {
        return Err(CliError::Config("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner().to_string();
        let mut msg = if path == "." {
            inner.clone()
        } else {
            format!("at `{path}`: {inner}")
        };
        if let Some(s) = suggestion(&inner) {
            msg.push_str(&format!("; did you mean `{s}`?"));
        }
        CliError::Config(msg)
    })?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Schedule;

    const MINIMAL: &str = r#"{"experiment": "collapse", "dataset": {"source": {"kind": "idx", "dir": "data/mnist"}}}"#;

    #[test]
    fn minimal_config_echo_is_a_fixed_point() {
        let cfg = parse_config_str(MINIMAL, &[]).unwrap();
        let echo = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config_str(&echo, &[]).unwrap(), cfg);
        assert!(echo.contains("\"hidden_dims\""));
    }

    #[test]
    fn overrides_apply_after_the_file() {
        let cfg = parse_config_str(
            MINIMAL,
            &[
                "optimizer.base_lr=0.05".into(),
                "metrics.cadence={\"mode\": \"every\", \"every\": 10}".into(),
                "output_dir=runs/x".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.optimizer.base_lr, 0.05);
        assert_eq!(cfg.metrics.cadence, Schedule::Every { every: 10 });
        assert_eq!(cfg.output_dir, std::path::PathBuf::from("runs/x"));
        let echo = serde_json::to_string(&cfg).unwrap();
        assert!(echo.contains("\"base_lr\":0.05"));
    }

    #[test]
    fn typo_gets_a_suggestion() {
        let text = r#"{"experiment": "collapse", "optimiser": {},
                       "dataset": {"source": {"kind": "idx", "dir": "d"}}}"#;
        let msg = parse_config_str(text, &[]).unwrap_err().to_string();
        assert!(msg.contains("optimiser") && msg.contains("did you mean `optimizer`"), "{msg}");
        let nested = parse_config_str(MINIMAL, &["optimizer.batch_sise=3".into()]).unwrap_err().to_string();
        assert!(nested.contains("batch_size"), "{nested}");
    }

    #[test]
    fn missing_and_mistyped_fields_name_the_key() {
        let msg = parse_config_str(r#"{"experiment": "collapse"}"#, &[]).unwrap_err().to_string();
        assert!(msg.contains("dataset"), "{msg}");
        let msg = parse_config_str(MINIMAL, &["optimizer.batch_size=\"big\"".into()]).unwrap_err().to_string();
        assert!(msg.contains("optimizer.batch_size"), "{msg}");
        assert!(parse_config_str("[1]", &[]).is_err());
        assert!(parse_config_str(MINIMAL, &["nonsense".into()]).is_err());
        assert!(parse_config_str(MINIMAL, &["seed.x=1".into()]).is_err());
    }
}
