//! Result tables: CSV and JSON output, CSV parsing, metadata sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use tokenwise_core::experiments::{ModelKind, ResultRow};
use tokenwise_core::Scheme;

use crate::error::{AppError, Result};

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "scheme",
    "model",
    "context",
    "char",
    "truth",
    "baseline",
    "corrected",
    "abs_err_baseline",
    "abs_err_corrected",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// `printf("%.12g")`: 12 significant digits, trailing zeros removed,
/// scientific notation outside `1e-4 <= |v| < 1e12`. Always uses `.`.
pub fn format_g12(v: f64) -> String {
    const P: i32 = 12;
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

fn record(row: &ResultRow) -> [String; 10] {
    [
        row.experiment.clone(),
        row.scheme.as_str().to_string(),
        row.model.as_str().to_string(),
        row.context.clone(),
        row.char.to_string(),
        format_g12(row.truth),
        format_g12(row.baseline),
        format_g12(row.corrected),
        format_g12(row.abs_err_baseline),
        format_g12(row.abs_err_corrected),
    ]
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(std::io::Error::other)?;
    for row in rows {
        w.write_record(record(row)).map_err(std::io::Error::other)?;
    }
    w.flush()
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 output")
}

/// Parse a results CSV; the header must match [`CSV_HEADER`] exactly.
pub fn parse_csv(text: &str) -> std::result::Result<Vec<ResultRow>, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        let found: Vec<&str> = header.iter().collect();
        return Err(format!("header {found:?} does not match {CSV_HEADER:?}"));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let bad = |col: usize| format!("row {}: column {}: cannot parse {:?}", line + 1, CSV_HEADER[col], at(col));
        let num = |i: usize| parse_float(at(i)).ok_or_else(|| bad(i));
        let scheme = match at(1) {
            "mpe" => Scheme::Mpe,
            "bpe" => Scheme::Bpe,
            _ => return Err(bad(1)),
        };
        let model = ModelKind::parse(at(2)).ok_or_else(|| bad(2))?;
        let mut chars = at(4).chars();
        let c = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => return Err(bad(4)),
        };
        rows.push(ResultRow {
            experiment: at(0).to_string(),
            scheme,
            model,
            context: at(3).to_string(),
            char: c,
            truth: num(5)?,
            baseline: num(6)?,
            corrected: num(7)?,
            abs_err_baseline: num(8)?,
            abs_err_corrected: num(9)?,
        });
    }
    Ok(rows)
}

fn num_value(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn row_json(row: &ResultRow) -> Value {
    json!({
        "experiment": row.experiment,
        "scheme": row.scheme.as_str(),
        "model": row.model.as_str(),
        "context": row.context,
        "char": row.char.to_string(),
        "truth": num_value(row.truth),
        "baseline": num_value(row.baseline),
        "corrected": num_value(row.corrected),
        "abs_err_baseline": num_value(row.abs_err_baseline),
        "abs_err_corrected": num_value(row.abs_err_corrected),
    })
}

pub fn json_string(rows: &[ResultRow], metadata: &Map<String, Value>) -> String {
    let doc = json!({
        "metadata": Value::Object(metadata.clone()),
        "rows": rows.iter().map(row_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write rows in `format` to `out`. CSV output also gets a metadata sidecar;
/// JSON output embeds the metadata.
pub fn emit_results(rows: &[ResultRow], format: Format, out: &Path, metadata: &Map<String, Value>) -> Result<()> {
    if rows.is_empty() {
        return Err(AppError::Usage("no result rows to write".to_string()));
    }
    match format {
        Format::Csv => {
            fs::write(out, csv_string(rows)).map_err(|e| AppError::io(out, e))?;
            let meta = serde_json::to_string_pretty(&Value::Object(metadata.clone())).expect("serializable") + "\n";
            let side = sidecar_path(out);
            fs::write(&side, meta).map_err(|e| AppError::io(side, e))
        }
        Format::Json => fs::write(out, json_string(rows, metadata)).map_err(|e| AppError::io(out, e)),
    }
}
