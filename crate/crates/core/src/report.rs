//! Report assembly and CSV / JSON / plot-data serialisation.
//!
//! Floats are written with 17 significant digits so every value round-trips.
//! Each text file starts with `# ` comment lines echoing the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "sbvar";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Num(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Num(v) => format_float(v[i]),
            Column::Text(v) => v[i].clone(),
        }
    }
}

/// Named column-major table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            header: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn with_num(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.header.push(name.into());
        self.columns.push(Column::Num(values));
        self
    }

    pub fn with_text(mut self, name: impl Into<String>, values: Vec<String>) -> Self {
        self.header.push(name.into());
        self.columns.push(Column::Text(values));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    fn check_shape(&self) -> Result<()> {
        let rows = self.rows();
        if self.columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Argument(format!(
                "table {} has ragged columns",
                self.name
            )));
        }
        Ok(())
    }

    /// Comment lines for `config`, then a header row, then one line per row.
    pub fn to_csv(&self, config: &Value) -> Result<String> {
        self.check_shape()?;
        let mut out = config_comment(config);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for i in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c.cell(i)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    /// Whitespace-separated plot data; the header is a comment line.
    pub fn to_dat(&self, config: &Value) -> Result<String> {
        self.check_shape()?;
        let mut out = config_comment(config);
        let _ = writeln!(out, "# {}", self.header.join(" "));
        for i in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c.cell(i)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        Ok(out)
    }
}

fn config_comment(config: &Value) -> String {
    format!(
        "# {TOOL_NAME} {}\n# config: {config}\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// Named pass/fail entry tied to the operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub operation: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Check>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            metadata: Metadata {
                tool: TOOL_NAME.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config,
                created_unix,
            },
            tables: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn push_check(
        &mut self,
        name: impl Into<String>,
        operation: impl Into<String>,
        passed: bool,
        margin: f64,
        detail: Value,
    ) {
        self.verdicts.push(Check {
            name: name.into(),
            operation: operation.into(),
            passed,
            margin,
            detail,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.verdicts.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        for t in &self.tables {
            t.check_shape()?;
        }
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// All tables as CSV blocks separated by a blank line.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# table: {}", t.name);
            out.push_str(&t.to_csv(&self.metadata.config)?);
        }
        Ok(out)
    }
}

/// `x` in scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `x` with `digits` significant digits in positional notation.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            1.0,
            -0.1,
            std::f64::consts::PI,
            1e-300,
            5e-324,
            1.7976931348623157e308,
            0.045177444479562,
        ] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(5f64.sqrt() - 1.0, 12), "1.23606797750");
        assert_eq!(format_significant(1.0, 12), "1.00000000000");
        assert_eq!(format_significant(0.2717797887081347, 12), "0.271779788708");
        assert_eq!(format_significant(123.456, 4), "123.5");
    }

    #[test]
    fn csv_layout() {
        let t = Table::new("risk")
            .with_num("tau", vec![0.0, 1.0])
            .with_text("method", vec!["quadrature".into(), "quadrature".into()]);
        let csv = t.to_csv(&json!({"p": 4})).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# sbvar "));
        assert_eq!(lines[1], r#"# config: {"p":4}"#);
        assert_eq!(lines[2], "tau,method");
        assert_eq!(lines[3], "0.0000000000000000e0,quadrature");
        assert_eq!(lines.len(), 5);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn ragged_tables_rejected() {
        let t = Table::new("bad")
            .with_num("a", vec![1.0])
            .with_num("b", vec![]);
        assert!(t.to_csv(&json!({})).is_err());
    }

    #[test]
    fn json_has_three_keys() {
        let mut r = Report::new("test", json!({"x": 1}));
        r.tables.push(Table::new("t").with_num("a", vec![1.0]));
        r.push_check("c", "op", true, 0.5, json!(null));
        let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 3);
        assert!(
            obj.contains_key("metadata")
                && obj.contains_key("tables")
                && obj.contains_key("verdicts")
        );
        assert!(r.all_passed());
        let back: Report = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
