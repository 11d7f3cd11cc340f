//! Text, CSV and JSON emission with run metadata.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::{Format, Params};
use crate::CliError;

/// A table of results with an optional summary object.
#[derive(Debug, Default)]
pub struct Output {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Option<Value>,
    /// Replaces the default tab-separated rendering in text mode.
    pub text: Option<String>,
}

impl Output {
    pub fn table(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Self::default() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn with_summary(mut self, summary: Value) -> Self {
        self.summary = Some(summary);
        self
    }

    pub fn with_text(mut self, text: String) -> Self {
        self.text = Some(text);
        self
    }
}

/// Shortest decimal that survives 12 significant digits, so that
/// `5.000000000000001` prints as `5.0`.
pub fn tidy(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded:?}")
}

fn text_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => tidy(n.as_f64().unwrap_or(f64::NAN)),
        other => cell(other),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => format!("{:?}", n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn metadata(command: &str, params: &Params) -> Value {
    json!({
        "tool": "zonalchaos",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": params.seed(),
        "cache_version": zonalchaos::zonal::CACHE_VERSION,
        "config": params.resolved(),
    })
}

fn render_json(command: &str, params: &Params, out: &Output) -> String {
    let rows: Vec<Value> = out
        .rows
        .iter()
        .map(|r| Value::Object(out.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect::<Map<_, _>>()))
        .collect();
    let mut doc = json!({ "metadata": metadata(command, params), "columns": out.columns, "rows": rows });
    if let Some(s) = &out.summary {
        doc["summary"] = s.clone();
    }
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

fn comment_header(command: &str, params: &Params) -> String {
    let meta = metadata(command, params);
    let mut s = String::new();
    for key in ["tool", "version", "command", "seed", "cache_version", "config"] {
        let v = &meta[key];
        let shown = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
        s.push_str(&format!("# {key}: {shown}\n"));
    }
    s
}

fn render_csv(command: &str, params: &Params, out: &Output) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&out.columns).map_err(|e| CliError::Internal(e.to_string()))?;
    for r in &out.rows {
        w.write_record(r.iter().map(cell)).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let mut s = comment_header(command, params) + &body;
    if let Some(summary) = &out.summary {
        s.push_str(&format!("# summary: {summary}\n"));
    }
    Ok(s)
}

fn render_text(out: &Output) -> String {
    if let Some(t) = &out.text {
        return if t.ends_with('\n') { t.clone() } else { format!("{t}\n") };
    }
    let mut s = out.columns.join("\t") + "\n";
    for r in &out.rows {
        s.push_str(&r.iter().map(text_cell).collect::<Vec<_>>().join("\t"));
        s.push('\n');
    }
    if let Some(summary) = &out.summary {
        s.push_str(&serde_json::to_string_pretty(summary).expect("json"));
        s.push('\n');
    }
    s
}

/// Writes `out` to `--out` or stdout. Files always carry the metadata.
pub fn emit(command: &str, params: &Params, out: &Output) -> Result<(), CliError> {
    let rendered = match params.format() {
        Format::Json => render_json(command, params, out),
        Format::Csv => render_csv(command, params, out)?,
        Format::Text if params.out.is_some() => comment_header(command, params) + &render_text(out),
        Format::Text => render_text(out),
    };
    match &params.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(rendered.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}
