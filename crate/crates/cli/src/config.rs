//! Flat `key=value` run files.
//!
//! Every line names a flag of the chosen subcommand without its leading
//! dashes. The tokens are spliced in right after the subcommand words, so a
//! flag repeated on the command line wins over the file.

use std::fs;

use adawave::Error;
use anyhow::{Context, Result};

/// Global flags that take a value. Needed to find where the subcommand ends.
const GLOBAL_WITH_VALUE: [&str; 2] = ["--config", "--threads"];

/// Subcommands that have subcommands of their own.
const NESTED: [&str; 1] = ["experiment"];

/// Turns config text into command-line tokens.
///
/// `true` becomes a bare switch and `false` drops the key. Underscores in
/// keys are accepted as dashes.
pub fn tokens(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Argument(format!("config line {}: expected key=value, got {line:?}", n + 1)).into());
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::Argument(format!("config line {}: bad key {key:?}", n + 1)).into());
        }
        if key == "config" {
            return Err(Error::Argument(format!("config line {}: config files do not nest", n + 1)).into());
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Index just past the subcommand words of `args` (which include argv[0]).
fn command_end(args: &[String]) -> usize {
    let mut i = 1;
    let mut words = 0;
    let mut last = args.len();
    while i < args.len() {
        let a = args[i].as_str();
        if GLOBAL_WITH_VALUE.contains(&a) {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            if words > 0 {
                break;
            }
            i += 1;
            continue;
        }
        words += 1;
        last = i + 1;
        if words == 1 && NESTED.contains(&a) {
            i += 1;
            continue;
        }
        break;
    }
    if words == 0 {
        args.len()
    } else {
        last
    }
}

fn config_path(args: &[String]) -> Option<String> {
    let mut found = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            found = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            found = Some(p.to_string());
        }
        i += 1;
    }
    found
}

/// Expands `--config FILE` into the tokens of FILE.
pub fn splice(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Argument(format!("cannot read config {path}: {e}")))
        .context("loading config")?;
    let extra = tokens(&text)?;
    let at = command_end(&args);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn booleans_and_comments() {
        let t = tokens("# run\nlevels = 4\nnormalize=true\nmean=false\n\nmax_merge=2\n").unwrap();
        assert_eq!(t, argv("--levels 4 --normalize --max-merge 2"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(tokens("levels 4").is_err());
        assert!(tokens("bad key=1").is_err());
        assert!(tokens("config=other.cfg").is_err());
    }

    #[test]
    fn finds_the_end_of_the_command() {
        assert_eq!(command_end(&argv("adawave verify --mask m")), 2);
        assert_eq!(command_end(&argv("adawave --threads 2 experiment roc --trials 3")), 5);
        assert_eq!(command_end(&argv("adawave --config c experiment --out x")), 4);
        assert_eq!(command_end(&argv("adawave")), 1);
    }

    #[test]
    fn file_tokens_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "levels=2\n").unwrap();
        let args = argv(&format!("adawave verify --config {} --levels 5", cfg.display()));
        let out = splice(args).unwrap();
        let levels: Vec<&String> = out.iter().skip_while(|a| *a != "--levels").collect();
        assert_eq!(out[2..4], argv("--levels 2"));
        assert_eq!(levels.last().unwrap().as_str(), "5");
    }
}
