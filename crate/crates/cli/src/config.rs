//! Resolved per-command configurations, echoed into every output file and
//! accepted back through `--config`.

use std::fs;
use std::path::Path;

use baskakov::moments::{AuditConfig, AuditGrid};
use baskakov::{OperatorParams, TruncationPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub mass_eps: f64,
    pub term_eps: f64,
    pub consecutive_small: u32,
    pub k_max: u64,
}

impl PolicyConfig {
    pub fn policy(&self) -> Result<TruncationPolicy, CliError> {
        TruncationPolicy::new(self.mass_eps, self.term_eps, self.consecutive_small, self.k_max)
            .map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub n: u64,
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ParamsConfig {
    pub fn params(&self) -> Result<OperatorParams, CliError> {
        OperatorParams::new(self.n, self.a, self.alpha, self.beta).map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub params: ParamsConfig,
    pub x: f64,
    #[serde(rename = "fn")]
    pub function: String,
    pub policy: PolicyConfig,
}

/// Window settings; `upper = None` means the per-point default window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub upper: Option<f64>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
    #[serde(rename = "fn")]
    pub function: String,
    pub n_ladder: Vec<u64>,
    pub window: WindowConfig,
    pub policy: PolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
    #[serde(rename = "fn")]
    pub function: String,
    pub lambda: f64,
    pub n_ladder: Vec<u64>,
    pub window: WindowConfig,
    pub policy: PolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRunConfig {
    pub grid: String,
    pub n: Vec<u64>,
    pub a: Vec<f64>,
    pub shifts: Vec<[f64; 2]>,
    pub x: Vec<f64>,
    pub tolerance: f64,
    pub limit_tolerance: f64,
    pub n_ladder: Vec<u64>,
    pub policy: PolicyConfig,
}

impl AuditRunConfig {
    pub fn grid(&self) -> AuditGrid {
        AuditGrid {
            ns: self.n.clone(),
            a_values: self.a.clone(),
            shifts: self.shifts.iter().map(|s| (s[0], s[1])).collect(),
            xs: self.x.clone(),
        }
    }

    pub fn audit(&self) -> AuditConfig {
        AuditConfig {
            tolerance: self.tolerance,
            limit_tolerance: self.limit_tolerance,
            ladder: self.n_ladder.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub input: String,
    pub series: Vec<String>,
    pub x_column: Option<String>,
}

/// Every resolved configuration, tagged by command name. Deserialized by
/// hand in [`parse`]: buffered tagged enums lose arbitrary-precision numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Config {
    Eval(EvalConfig),
    Audit(AuditRunConfig),
    Converge(ConvergeConfig),
    Direct(DirectConfig),
    Plotdata(PlotConfig),
}

impl Config {
    pub fn command(&self) -> &'static str {
        match self {
            Config::Eval(_) => "eval",
            Config::Audit(_) => "audit",
            Config::Converge(_) => "converge",
            Config::Direct(_) => "direct",
            Config::Plotdata(_) => "plotdata",
        }
    }
}

/// Reads a configuration from a bare JSON document, from a JSON report
/// carrying a `config` field, or from the `# config:` header of a CSV or
/// data file written by this tool.
pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let json = match text.lines().next() {
        Some(first) if first.starts_with("# config:") => first["# config:".len()..].trim().to_string(),
        _ => text,
    };
    let value: Value = serde_json::from_str(&json)
        .map_err(|e| CliError::Usage(format!("{} is not a configuration: {e}", path.display())))?;
    let value = match value {
        Value::Object(mut map) if map.contains_key("config") => map.remove("config").expect("present"),
        other => other,
    };
    parse(value).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse(value: Value) -> Result<Config, String> {
    let Value::Object(mut map) = value else {
        return Err("expected a JSON object".into());
    };
    let command = match map.remove("command") {
        Some(Value::String(c)) => c,
        _ => return Err("missing string field 'command'".into()),
    };
    let value = Value::Object(map);
    fn inner<T: DeserializeOwned>(v: Value) -> Result<T, String> {
        serde_json::from_value(v).map_err(|e| e.to_string())
    }
    Ok(match command.as_str() {
        "eval" => Config::Eval(inner(value)?),
        "audit" => Config::Audit(inner(value)?),
        "converge" => Config::Converge(inner(value)?),
        "direct" => Config::Direct(inner(value)?),
        "plotdata" => Config::Plotdata(inner(value)?),
        other => return Err(format!("unknown command '{other}'")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::to_json_line;

    fn sample() -> Config {
        Config::Converge(ConvergeConfig {
            a: 1.0,
            alpha: 1.0,
            beta: 2.0,
            x: 0.1,
            function: "poly:0,0,1".into(),
            n_ladder: vec![10, 100],
            window: WindowConfig {
                upper: None,
                grid_points: 512,
            },
            policy: PolicyConfig {
                mass_eps: 1e-14,
                term_eps: 1e-16,
                consecutive_small: 5,
                k_max: 1_000_000,
            },
        })
    }

    #[test]
    fn round_trips_through_formatted_json() {
        let c = sample();
        let text = to_json_line(&c);
        assert!(text.contains(r#""command":"converge""#));
        assert!(text.contains(r#""fn":"poly:0,0,1""#));
        let back = parse(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn loads_from_any_output_kind() {
        let dir = tempfile::tempdir().unwrap();
        let line = to_json_line(&sample());
        let csv = dir.path().join("a.csv");
        fs::write(&csv, format!("# config: {line}\nn,Lf\n")).unwrap();
        assert_eq!(load(&csv).unwrap(), sample());
        let report = dir.path().join("a.json");
        fs::write(&report, format!("{{\"config\": {line}, \"reports\": []}}")).unwrap();
        assert_eq!(load(&report).unwrap(), sample());
        let bare = dir.path().join("b.json");
        fs::write(&bare, &line).unwrap();
        assert_eq!(load(&bare).unwrap(), sample());
        assert!(matches!(load(&dir.path().join("missing.json")), Err(CliError::Io(_))));
        fs::write(&bare, "{\"command\": \"eval\"}").unwrap();
        assert!(matches!(load(&bare), Err(CliError::Usage(_))));
    }
}
