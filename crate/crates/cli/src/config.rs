//! Config resolution (defaults ← JSON file ← flags) and run directories.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{io_error, CliError};

/// Environment variable naming the default root for run directories.
pub const RUNS_ENV: &str = "NOTESCREEN_RUNS_DIR";
pub const DEFAULT_RUNS_ROOT: &str = "runs";

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        other => other,
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults, overlaid by the config file, overlaid by non-null flag values.
pub fn resolve<C>(file: Option<&Path>, flags: Value) -> Result<C, CliError>
where
    C: Serialize + DeserializeOwned + Default,
{
    let mut value = serde_json::to_value(C::default()).expect("config serializes");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let from_file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        merge(&mut value, strip_nulls(from_file));
    }
    merge(&mut value, strip_nulls(flags));
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

/// Creates the run directory: `out` if given, else a fresh
/// `<root>/<command>-<unix seconds>[-n]` under `$NOTESCREEN_RUNS_DIR` (or `runs`).
pub fn run_dir(out: Option<&Path>, command: &str) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(RUNS_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_ROOT));
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let mut candidate = root.join(format!("{command}-{stamp}"));
            let mut n = 1;
            while candidate.exists() {
                candidate = root.join(format!("{command}-{stamp}-{n}"));
                n += 1;
            }
            candidate
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| io_error(format!("cannot create {}", dir.display()), e))?;
    Ok(dir)
}

/// Writes `config.json` with the command, tool version and resolved config.
pub fn echo_config<C: Serialize>(dir: &Path, command: &str, config: &C) -> Result<(), CliError> {
    let doc = serde_json::json!({
        "command": command,
        "tool_version": notescreen_core::VERSION,
        "config": config,
    });
    write_json(&dir.join("config.json"), &doc)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(format!("cannot write {}", path.display()), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Inner {
        a: u32,
        b: u32,
    }

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Cfg {
        seed: u64,
        name: Option<String>,
        inner: Inner,
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 4, "name": "x", "inner": {"a": 1, "b": 2}}"#).unwrap();
        let c: Cfg = resolve(Some(&path), json!({"seed": 9, "name": null, "inner": {"b": 7, "a": null}})).unwrap();
        assert_eq!(
            c,
            Cfg {
                seed: 9,
                name: Some("x".into()),
                inner: Inner { a: 1, b: 7 }
            }
        );
        let d: Cfg = resolve(None, json!({})).unwrap();
        assert_eq!(d, Cfg::default());
        assert!(matches!(resolve::<Cfg>(None, json!({"seed": "no"})), Err(CliError::Usage(_))));
    }

    #[test]
    fn run_dirs_are_fresh_and_echo_config() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_dir(Some(&dir.path().join("r")), "split").unwrap();
        echo_config(&out, "split", &json!({"seed": 1})).unwrap();
        let v: Value = read_json(&out.join("config.json")).unwrap();
        assert_eq!(v["command"], "split");
        assert_eq!(v["tool_version"], notescreen_core::VERSION);
        assert_eq!(v["config"]["seed"], 1);
    }
}
