//! Rendering benchmark records as Markdown, CSV, or JSON.

use std::fmt;
use std::str::FromStr;

use super::BenchRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Markdown => "md",
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidParameter(format!(
                "unknown output format {s:?}"
            ))),
        }
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "fixture",
    "target",
    "detail",
    "size_bytes",
    "runs",
    "iters",
    "elapsed_ns",
    "rate",
    "overhead_pct",
];

fn row(r: &BenchRecord) -> [String; 9] {
    [
        r.fixture.to_string(),
        r.target.to_string(),
        r.detail.clone(),
        r.size_bytes.to_string(),
        r.runs.to_string(),
        r.iters_per_run.to_string(),
        r.elapsed_ns.to_string(),
        format!("{:.6e}", r.rate_ops_per_s),
        r.overhead_pct
            .map(|o| format!("{o:.3}"))
            .unwrap_or_default(),
    ]
}

pub fn render(records: &[BenchRecord], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => render_csv(records),
        OutputFormat::Json => Ok(serde_json::to_string_pretty(records)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            + "\n"),
        OutputFormat::Markdown => Ok(render_markdown(records)),
    }
}

fn render_csv(records: &[BenchRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(row(r)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn render_markdown(records: &[BenchRecord]) -> String {
    let rows: Vec<[String; 9]> = records.iter().map(row).collect();
    let mut widths = CSV_HEADER.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| {
        let mut s = String::from("|");
        for (c, w) in cells.iter().zip(widths) {
            s.push_str(&format!(" {c:<w$} |"));
        }
        s.push('\n');
        s
    };
    let mut out = line(&CSV_HEADER);
    let rules: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(&rules.iter().map(String::as_str).collect::<Vec<_>>()));
    for r in &rows {
        out.push_str(&line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    out
}
