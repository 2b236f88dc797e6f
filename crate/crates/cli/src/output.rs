//! Output sinks and the reproducibility header.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Config echo, seed and version written atop every output.
#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: Value,
}

impl Header {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Header { tool: "zlab", version: env!("CARGO_PKG_VERSION"), command: command.to_string(), seed, config }
    }

    fn comment_line(&self) -> String {
        format!("# {}\n", serde_json::to_string(self).expect("header serializes"))
    }
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Replaces non-finite numbers by `null`.
pub fn sanitize(v: Value) -> Value {
    match v {
        Value::Array(a) => Value::Array(a.into_iter().map(sanitize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, sanitize(v))).collect()),
        Value::Number(n) if n.as_f64().is_some_and(|x| !x.is_finite()) => Value::Null,
        other => other,
    }
}

#[derive(Serialize)]
struct Document<'a> {
    header: &'a Header,
    #[serde(flatten)]
    body: Map<String, Value>,
}

/// `{"header": …, …body}` as pretty JSON, header first.
pub fn write_json(path: Option<&Path>, header: &Header, body: Value) -> Result<()> {
    let body = match sanitize(body) {
        Value::Object(o) => o,
        other => Map::from_iter([("result".to_string(), other)]),
    };
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, &Document { header, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// JSON-lines: the header record first, then one record per item.
pub fn write_json_lines<T: Serialize>(path: Option<&Path>, header: &Header, records: &[T]) -> Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer(&mut w, &json!({ "header": header }))?;
    writeln!(w)?;
    for r in records {
        serde_json::to_writer(&mut w, &sanitize(serde_json::to_value(r)?))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV cell for a number; non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// RFC-4180 CSV preceded by the header as a `#` comment line.
pub fn write_csv(path: Option<&Path>, header: &Header, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = open(path)?;
    w.write_all(header.comment_line().as_bytes())?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(columns)?;
        for r in rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_become_null_or_empty() {
        let v = json!({ "a": [1.0, 2.5], "b": { "c": 3 } });
        assert_eq!(sanitize(v.clone()), v);
        let bad = serde_json::to_value(f64::NAN).unwrap();
        assert!(bad.is_null());
        assert_eq!(num(f64::INFINITY), "");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn csv_quotes_and_header_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        let h = Header::new("count", 7, json!({ "x": 1 }));
        write_csv(Some(&path), &h, &["a".into(), "b".into()], &[vec!["1,2".into(), "x\"y".into()]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let first = lines.next().unwrap();
        assert!(first.starts_with("# {") && first.contains("\"seed\":7"));
        assert_eq!(lines.next(), Some("a,b"));
        assert_eq!(lines.next(), Some("\"1,2\",\"x\"\"y\""));
    }

    #[test]
    fn json_document_starts_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.json");
        write_json(Some(&path), &Header::new("inflate", 0, json!({})), json!({ "alpha": 1, "zeta": 2 })).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.trim_start().starts_with("{\n  \"header\""));
    }
}
