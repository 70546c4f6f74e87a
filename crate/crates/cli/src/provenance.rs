//! Provenance headers. CSV files start with a `# provenance: {json}` line,
//! JSONL files with a `{"provenance": ...}` record and JSON files with a
//! top-level `provenance` key. The header holds everything needed to
//! regenerate the file byte for byte.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const TOOL: &str = "coexist";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const CSV_PREFIX: &str = "# provenance: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the file.
    pub command: String,
    /// Materialized config (or verify options).
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
        })
    }

    pub fn csv_line(&self) -> String {
        format!("{CSV_PREFIX}{}\n", serde_json::to_string(self).expect("provenance serializes"))
    }

    pub fn jsonl_line(&self) -> String {
        format!("{}\n", serde_json::json!({ "provenance": self }))
    }

    /// Reads the header from any file written by this tool.
    pub fn from_artifact(text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or("");
        let bad = |e: serde_json::Error| CliError::Config(format!("unreadable provenance header: {e}"));
        if let Some(rest) = first.strip_prefix(CSV_PREFIX) {
            return serde_json::from_str(rest).map_err(bad);
        }
        let v: Value = match serde_json::from_str::<Value>(first) {
            Ok(v) if v.get("provenance").is_some() => v,
            _ => serde_json::from_str(text).map_err(bad)?,
        };
        let p = v
            .get("provenance")
            .cloned()
            .ok_or_else(|| CliError::Config("file has no provenance header".into()))?;
        let p: Provenance = serde_json::from_value(p).map_err(bad)?;
        if p.tool != TOOL {
            return Err(CliError::Config(format!("file was written by \"{}\"", p.tool)));
        }
        Ok(p)
    }
}

/// Pretty JSON with `provenance` as the first key, newline-terminated.
pub fn json_with_provenance(p: &Provenance, body: &impl Serialize) -> Result<String> {
    let body = serde_json::to_value(body).map_err(|e| CliError::Config(e.to_string()))?;
    let mut map = serde_json::Map::new();
    map.insert("provenance".into(), serde_json::to_value(p).expect("provenance serializes"));
    match body {
        Value::Object(o) => map.extend(o),
        other => {
            map.insert("result".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json serializes");
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_round_trip() {
        let p = Provenance::new("tune", &serde_json::json!({"alpha": 0.5})).unwrap();
        let csv = format!("{}a,b\n1,2\n", p.csv_line());
        assert_eq!(Provenance::from_artifact(&csv).unwrap(), p);
        let jsonl = format!("{}{{\"x\":1}}\n", p.jsonl_line());
        assert_eq!(Provenance::from_artifact(&jsonl).unwrap(), p);
        let json = json_with_provenance(&p, &serde_json::json!({"x": 1})).unwrap();
        assert!(json.starts_with("{\n  \"provenance\""));
        assert_eq!(Provenance::from_artifact(&json).unwrap(), p);
    }
}
