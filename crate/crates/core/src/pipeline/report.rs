//! Rendering of flat or nested report values as JSON, CSV or text.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(format!("unknown format {s:?} (expected json, csv or text)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "text",
        })
    }
}

/// Leaf values keyed by dotted path, in document order.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders `value` in `format`, always ending with a newline.
pub fn render(value: &impl Serialize, format: Format) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    match format {
        Format::Json => serde_json::to_string_pretty(&v).expect("values serialize") + "\n",
        Format::Csv | Format::Text => {
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            let mut out = String::new();
            if format == Format::Csv {
                out.push_str("key,value\n");
            }
            for (k, val) in rows {
                match format {
                    Format::Csv => out.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&val))),
                    _ => out.push_str(&format!("{k}: {val}\n")),
                }
            }
            out
        }
    }
}
