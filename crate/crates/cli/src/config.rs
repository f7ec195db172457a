//! `--config file.json` support: the file's keys are spliced into the
//! argument list as flags right after the subcommand, so anything given on
//! the command line still wins (every command sets `args_override_self`).

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

/// Subcommands that take a second positional word (`gen cs`).
const NESTED: &[&str] = &["gen"];

/// Locates `--config <path>` or `--config=<path>` and removes it from `args`.
fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy().into_owned();
        if s == "--" {
            break;
        }
        if s == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a path".into());
            }
            let path = args.remove(i + 1);
            args.remove(i);
            return Ok(Some(path));
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            let path = OsString::from(rest);
            args.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

fn value_tokens(key: &str, value: &Value) -> Result<Vec<String>, String> {
    let flag = format!("--{}", key.replace('_', "-"));
    Ok(match value {
        Value::Null | Value::Bool(false) => vec![],
        Value::Bool(true) => vec![flag],
        Value::Number(n) => vec![flag, n.to_string()],
        Value::String(s) => vec![flag, s.clone()],
        Value::Array(items) => {
            let parts: Result<Vec<String>, String> = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => Err(format!("config key {key}: unsupported list element {other}")),
                })
                .collect();
            vec![flag, parts?.join(",")]
        }
        Value::Object(_) => return Err(format!("config key {key}: nested objects are not supported")),
    })
}

/// Flags equivalent to the JSON object in `path`.
pub fn config_flags(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Value::Object(map) = doc else {
        return Err(format!("{}: expected a JSON object", path.display()));
    };
    let mut out = Vec::new();
    for (key, value) in &map {
        out.extend(value_tokens(key, value)?);
    }
    Ok(out)
}

/// Index just past the subcommand words, counting from the first
/// non-flag argument.
fn insertion_point(args: &[OsString]) -> usize {
    let Some(cmd) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1) else {
        return args.len();
    };
    let nested = NESTED.contains(&args[cmd].to_string_lossy().as_ref());
    if nested && cmd + 1 < args.len() && !args[cmd + 1].to_string_lossy().starts_with('-') {
        cmd + 2
    } else {
        cmd + 1
    }
}

/// The process arguments with any `--config` file expanded in place.
pub fn expand_args(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let flags = config_flags(Path::new(&path))?;
    let at = insertion_point(&args);
    args.splice(at..at, flags.into_iter().map(OsString::from));
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn insertion_after_nested_subcommand() {
        assert_eq!(insertion_point(&os(&["bin", "gen", "cs", "--d", "3"])), 3);
        assert_eq!(insertion_point(&os(&["bin", "solve", "--method", "papc"])), 2);
        assert_eq!(insertion_point(&os(&["bin"])), 1);
    }

    #[test]
    fn json_values_become_flags() {
        assert_eq!(value_tokens("max_iters", &serde_json::json!(5)).unwrap(), ["--max-iters", "5"]);
        assert_eq!(value_tokens("oracle", &serde_json::json!(true)).unwrap(), ["--oracle"]);
        assert!(value_tokens("oracle", &serde_json::json!(false)).unwrap().is_empty());
        assert_eq!(
            value_tokens("methods", &serde_json::json!(["papc", "algo1"])).unwrap(),
            ["--methods", "papc,algo1"]
        );
        assert!(value_tokens("x", &serde_json::json!({"a": 1})).is_err());
    }

    #[test]
    fn config_flag_is_removed() {
        let mut args = os(&["bin", "solve", "--config=c.json", "--oracle"]);
        assert_eq!(take_config_path(&mut args).unwrap(), Some(OsString::from("c.json")));
        assert_eq!(args, os(&["bin", "solve", "--oracle"]));
        let mut args = os(&["bin", "solve", "--config"]);
        assert!(take_config_path(&mut args).is_err());
    }
}
