//! CSV and JSON rendering of result rows.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Format;

/// Top-level JSON document; CSV carries the same rows, one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report<R> {
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
    pub rows: Vec<R>,
}

pub fn render<R: Serialize>(report: &Report<R>, format: Format) -> Result<String, serde_json::Error> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => render_csv(report),
    }
}

fn render_csv<R: Serialize>(report: &Report<R>) -> Result<String, serde_json::Error> {
    let rows: Vec<Value> = report.rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?;
    let mut out = String::new();
    if let Some(t) = report.generated_at {
        out.push_str(&format!("# generated_at={t}\n"));
    }
    let Some(Value::Object(first)) = rows.first() else {
        return Ok(out);
    };
    let columns: Vec<&String> = first.keys().collect();
    out.push_str(&columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in &rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| row.get(c.as_str()).map_or_else(String::new, cell))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// 17 significant digits for floats, plain integers, compact JSON for nested values.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format_float(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => quote(s),
        Value::Array(a) if a.iter().all(Value::is_string) => {
            quote(&a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("; "))
        }
        other => quote(&other.to_string()),
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        u: f64,
        n: u64,
        label: &'static str,
        missing: Option<f64>,
        notes: Vec<&'static str>,
    }

    #[test]
    fn csv_layout() {
        let r = Report {
            command: "t".into(),
            seed: 1,
            generated_at: None,
            rows: vec![Row { u: 0.1, n: 3, label: "a,b", missing: None, notes: vec!["x", "y"] }],
        };
        let s = render(&r, Format::Csv).unwrap();
        assert_eq!(s, "u,n,label,missing,notes\n1.0000000000000001e-1,3,\"a,b\",,x; y\n");
    }

    #[test]
    fn floats_keep_17_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}
