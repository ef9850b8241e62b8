//! `--config FILE` support: the JSON object is spliced into argv right
//! after the subcommand, so explicit flags that follow override it.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

use crate::CliError;

const SUBCOMMANDS: [&str; 4] = ["constellation", "analyze", "simulate", "kpa"];

pub fn expand_argv(raw: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::with_capacity(raw.len());
    let mut config_path = None;
    let mut it = raw.into_iter();
    args.extend(it.next());
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it
                .next()
                .ok_or_else(|| CliError::Param("--config needs a file path".into()))?;
            config_path = Some(path);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config_path = Some(OsString::from(p));
        } else {
            args.push(a);
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Param(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let Value::Object(map) = serde_json::from_str::<Value>(&text)
        .map_err(|e| CliError::Param(format!("config is not valid JSON: {e}")))?
    else {
        return Err(CliError::Param("config must be a JSON object".into()));
    };

    let sub_at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let sub_at = match (sub_at, map.get("command")) {
        (Some(i), _) => i,
        (None, Some(Value::String(cmd))) => {
            args.insert(1, OsString::from(cmd));
            1
        }
        (None, Some(_)) => return Err(CliError::Param("config \"command\" must be a string".into())),
        (None, None) => return Ok(args),
    };

    let mut flags = Vec::new();
    for (key, value) in &map {
        if key == "command" {
            continue;
        }
        let flag = format!("--{key}");
        match value {
            Value::Bool(true) => flags.push(OsString::from(flag)),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => {
                flags.push(OsString::from(flag));
                flags.push(OsString::from(n.to_string()));
            }
            Value::String(s) => {
                flags.push(OsString::from(flag));
                flags.push(OsString::from(s));
            }
            _ => return Err(CliError::Param(format!("config key \"{key}\" must be a scalar"))),
        }
    }
    args.splice(sub_at + 1..sub_at + 1, flags);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_precede_explicit_ones() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"M": 8, "alpha": 0.5, "masking-check": true, "noiseless": false}}"#).unwrap();
        let path = f.path().to_str().unwrap();
        let out = expand_argv(os(&["qsc", "--config", path, "simulate", "--M", "4"])).unwrap();
        assert_eq!(
            out,
            os(&["qsc", "simulate", "--M", "8", "--alpha", "0.5", "--masking-check", "--M", "4"])
        );
    }

    #[test]
    fn config_may_name_the_command() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"command": "kpa", "key-bits": 12}}"#).unwrap();
        let arg = format!("--config={}", f.path().display());
        let out = expand_argv(os(&["qsc", &arg])).unwrap();
        assert_eq!(out, os(&["qsc", "kpa", "--key-bits", "12"]));
    }

    #[test]
    fn rejects_non_objects() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "[1, 2]").unwrap();
        let path = f.path().to_str().unwrap();
        assert!(matches!(expand_argv(os(&["qsc", "--config", path])), Err(CliError::Param(_))));
        assert!(expand_argv(os(&["qsc", "--config"])).is_err());
    }
}
