//! Config-file and flag merging.
//!
//! Every command has a config struct with defaults. A JSON config file is a
//! flat object whose keys are config field names; keys the command does not
//! know are ignored so one file can serve several commands. Flags given on
//! the command line override file values.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const OUT_ENV: &str = "LOOPGAS_OUT";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

/// Default output root: `$LOOPGAS_OUT`, else `loopgas-out` in the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("loopgas-out"))
}

fn overlay(base: &mut Value, top: Value, source: &str, skip_null: bool) -> CliResult<()> {
    let Value::Object(top) = top else {
        return Err(CliError::Usage(format!("{source} must be a JSON object")));
    };
    let base = base
        .as_object_mut()
        .expect("config structs serialize to objects");
    for (k, v) in top {
        if skip_null && v.is_null() {
            continue;
        }
        if let Some(slot) = base.get_mut(&k) {
            *slot = v;
        }
    }
    Ok(())
}

/// `C::default()`, overlaid with the config file, overlaid with the flags.
///
/// Flags that serialize to `null` count as unset.
pub fn merge<C, F>(file: Option<&Path>, flags: &F) -> CliResult<C>
where
    C: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut value = serde_json::to_value(C::default())?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        overlay(&mut value, parsed, "config file", false)?;
    }
    overlay(&mut value, serde_json::to_value(flags)?, "flags", true)?;
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}

#[derive(Serialize)]
struct Echo<'a, C> {
    command: &'a str,
    config: &'a C,
}

/// Writes `effective_config.json` into `dir`, creating it if needed.
pub fn echo_config<C: Serialize>(dir: &Path, command: &str, config: &C) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(&Echo { command, config })?;
    std::fs::write(dir.join(EFFECTIVE_CONFIG_FILE), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use serde::Deserialize;

    use super::*;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    struct Demo {
        a: u32,
        b: f64,
        name: Option<String>,
    }

    #[derive(Serialize)]
    struct DemoFlags {
        a: Option<u32>,
        b: Option<f64>,
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"a": 3, "b": 1.5, "unrelated": true}"#).unwrap();
        let none = DemoFlags { a: None, b: None };
        let d: Demo = merge(None, &none).unwrap();
        assert_eq!(d, Demo::default());
        let d: Demo = merge(Some(&file), &none).unwrap();
        assert_eq!((d.a, d.b), (3, 1.5));
        let d: Demo = merge(
            Some(&file),
            &DemoFlags {
                a: Some(7),
                b: None,
            },
        )
        .unwrap();
        assert_eq!((d.a, d.b), (7, 1.5));
    }

    #[test]
    fn bad_files_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, "[1, 2]").unwrap();
        let none = DemoFlags { a: None, b: None };
        assert!(matches!(
            merge::<Demo, _>(Some(&file), &none),
            Err(CliError::Usage(_))
        ));
        std::fs::write(&file, r#"{"a": "three"}"#).unwrap();
        assert!(matches!(
            merge::<Demo, _>(Some(&file), &none),
            Err(CliError::Usage(_))
        ));
        let missing = dir.path().join("missing.json");
        assert!(matches!(
            merge::<Demo, _>(Some(&missing), &none),
            Err(CliError::Usage(_))
        ));
    }
}
