//! Run configuration: a TOML file whose keys the command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub norm: Option<NormSection>,
    pub apply: Option<ApplySection>,
    pub decompose: Option<DecomposeSection>,
    pub audit: Option<AuditSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSource {
    pub input: Option<PathBuf>,
    pub function: Option<String>,
    pub dim: Option<usize>,
    pub n: Option<usize>,
    #[serde(default)]
    pub function_params: toml::Table,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSection {
    pub space: Option<String>,
    pub s: Option<f64>,
    pub p: Option<toml::Value>,
    pub q: Option<toml::Value>,
    #[serde(flatten)]
    pub source: FunctionSource,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplySection {
    pub symbol: Option<String>,
    #[serde(default)]
    pub params: toml::Table,
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub source: FunctionSource,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    pub symbol: Option<String>,
    #[serde(default)]
    pub params: toml::Table,
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub period: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub suite: Option<String>,
    pub name: Option<String>,
    /// Per-audit overrides keyed by audit name.
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: Option<String>,
    #[serde(default)]
    pub params: toml::Table,
}

/// A parsed config file with its text kept for line-anchored messages.
#[derive(Debug, Default)]
pub struct Loaded {
    pub path: Option<PathBuf>,
    pub text: String,
    pub file: FileConfig,
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim_end()))?;
        Ok(Self { path: Some(path.to_path_buf()), text, file })
    }

    /// `path:line: message`, anchored on the first line mentioning `key`.
    pub fn anchored(&self, key: &str, message: impl std::fmt::Display) -> anyhow::Error {
        match (&self.path, self.line_of(key)) {
            (Some(p), Some(line)) => anyhow!("{}:{}: {}", p.display(), line, message),
            (Some(p), None) => anyhow!("{}: {}", p.display(), message),
            (None, _) => anyhow!("{message}"),
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        let last = key.rsplit('.').next().unwrap_or(key);
        self.text.lines().position(|l| {
            let t = l.trim_start();
            t.strip_prefix(last).is_some_and(|rest| rest.trim_start().starts_with('='))
                || (t.starts_with('[') && t.contains(last))
        })
        .map(|i| i + 1)
    }

    /// Rewrites a library error naming a key (as `` `key` ``) onto its line.
    pub fn locate(&self, err: anyhow::Error) -> anyhow::Error {
        let msg = format!("{err:#}");
        match msg.split('`').nth(1) {
            Some(key) if self.path.is_some() => self.anchored(key, msg.clone()),
            _ => err,
        }
    }
}

pub fn toml_to_json(t: &toml::Table) -> Value {
    serde_json::to_value(t).expect("TOML tables convert to JSON")
}

/// Parses `key=value` with a dotted key; the value is JSON when it parses,
/// else a string.
pub fn parse_assignment(s: &str) -> Result<(Vec<String>, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{s}`"))?;
    let key: Vec<String> = k.trim().split('.').map(str::to_string).collect();
    if key.iter().any(String::is_empty) {
        bail!("empty key segment in `{s}`");
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((key, value))
}

/// Sets `path` inside `root`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &[String], value: Value) {
    if !root.is_object() {
        *root = Value::Object(Map::new());
    }
    let obj = root.as_object_mut().expect("object");
    match path {
        [] => {}
        [last] => {
            obj.insert(last.clone(), value);
        }
        [head, rest @ ..] => set_path(obj.entry(head.clone()).or_insert(Value::Object(Map::new())), rest, value),
    }
}

/// Parses an exponent from a flag or a TOML value (`"inf"` allowed).
pub fn exponent(v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => lpkit::spaces::exponent::parse(s).map_err(|e| anyhow!(e)),
        other => bail!("bad exponent {other}"),
    }
}

/// `a..b` (inclusive) or a single value.
pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| anyhow!("bad range bound `{t}` in `{s}`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b) = (parse(a)?, parse(b)?);
            if b < a {
                bail!("empty range `{s}`");
            }
            Ok((a, b))
        }
        None => {
            let a = parse(s)?;
            Ok((a, a))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_and_ranges() {
        let (k, v) = parse_assignment("audit.n=512").unwrap();
        assert_eq!(k, vec!["audit", "n"]);
        assert_eq!(v, Value::from(512));
        assert_eq!(parse_assignment("symbol=bessel").unwrap().1, Value::from("bessel"));
        assert!(parse_assignment("novalue").is_err());
        assert_eq!(parse_range("3..8").unwrap(), (3, 8));
        assert_eq!(parse_range("3..=8").unwrap(), (3, 8));
        assert!(parse_range("8..3").is_err());
        let mut root = Value::Null;
        set_path(&mut root, &["a".into(), "b".into()], Value::from(1));
        assert_eq!(root, serde_json::json!({"a": {"b": 1}}));
    }

    #[test]
    fn unknown_keys_are_line_anchored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "out = \"x\"\n\n[audit]\nsuite = \"partition\"\nbogus = 1\n").unwrap();
        let err = Loaded::read(Some(&path)).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }
}
