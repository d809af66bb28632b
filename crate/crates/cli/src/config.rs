//! Flat `key = value` config files. Each key names a long flag of the
//! invoked subcommand; flags given on the command line win.

use std::ffi::OsString;

use crate::error::{CliError, CliResult};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(CliError::Usage(format!("config line {}: bad key {:?}", i + 1, k.trim())));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            return None;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(p.into());
        }
    }
    None
}

fn has_flag(args: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter()
        .filter_map(|a| a.to_str())
        .any(|a| a == long || a.starts_with(&eq))
}

/// Appends the config file's entries as flags for every key not already on
/// the command line. `true` becomes a bare switch and `false` is dropped.
pub fn apply_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.to_string_lossy())))?;
    let mut out = args;
    let mut extra = Vec::new();
    for (key, value) in parse_config(&text)? {
        if key == "config" || has_flag(&out, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                extra.push(format!("--{key}").into());
                extra.push(value.into());
            }
        }
    }
    // keep positional terminator semantics intact
    match out.iter().position(|a| a == "--") {
        Some(i) => {
            let tail = out.split_off(i);
            out.extend(extra);
            out.extend(tail);
        }
        None => out.extend(extra),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let c = parse_config("# top\nn = 10\n grid_preset=custom # trailing\n\n").unwrap();
        assert_eq!(c, vec![("n".into(), "10".into()), ("grid-preset".into(), "custom".into())]);
        assert!(parse_config("just words").is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "n = 5\nc = 3\npretty = true\nbev = false\n").unwrap();
        let a = args(&["g2v", "--config", p.to_str().unwrap(), "synth", "scene", "--n", "7"]);
        let out = apply_config(a).unwrap();
        let s: Vec<String> = out.iter().map(|x| x.to_string_lossy().into_owned()).collect();
        assert_eq!(&s[s.len() - 3..], &["--c", "3", "--pretty"]);
        assert!(s.windows(2).any(|w| w == ["--n", "7"]));
        assert!(!s.iter().any(|x| x == "--bev"));
    }
}
