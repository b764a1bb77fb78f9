//! CSV and Markdown output.

use crate::config::{Format, MeshSize};
use crate::run::{CellResult, DiagnosticRow, Status};
use anyhow::Result;
use serde::Serialize;
use std::collections::BTreeSet;
use std::io::Write;

pub const CELL_HEADERS: [&str; 14] = [
    "domain",
    "method",
    "precond",
    "p",
    "h",
    "dofs",
    "status",
    "iterations",
    "residual",
    "assembly_time",
    "setup_time",
    "solve_time",
    "total_time",
    "message",
];

pub const DIAGNOSTIC_HEADERS: [&str; 5] = ["domain", "p", "h", "quantity", "value"];

fn write_csv<R: Serialize, W: Write>(rows: &[R], headers: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(headers)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn seconds(t: f64) -> String {
    if t >= 0.01 {
        format!("{t:.2}")
    } else {
        format!("{t:.1e}")
    }
}

fn cell_text(c: &CellResult) -> String {
    match (c.status, c.iterations, c.total_time) {
        (Status::Skipped, ..) => "*".into(),
        (Status::Converged, Some(it), Some(t)) => format!("{it:.1} / {}", seconds(t)),
        (Status::NotConverged, Some(it), Some(t)) => format!("{it:.1} / {} (nc)", seconds(t)),
        _ => "failed".into(),
    }
}

/// `h` down the rows, `p` across the columns, cells `iterations / time`.
fn results_markdown<W: Write>(results: &[CellResult], mut out: W) -> Result<()> {
    let ps: BTreeSet<usize> = results.iter().map(|c| c.p).collect();
    let hs: BTreeSet<MeshSize> = results.iter().map(|c| c.h).collect();
    if let Some(c) = results.first() {
        writeln!(out, "{} / {} / {}: iterations / time (s)\n", c.domain, c.method, c.precond)?;
    }
    write!(out, "| h |")?;
    for p in &ps {
        write!(out, " p = {p} |")?;
    }
    write!(out, "\n|---|")?;
    for _ in &ps {
        write!(out, "---|")?;
    }
    writeln!(out)?;
    for h in &hs {
        write!(out, "| {h} |")?;
        for &p in &ps {
            let text = results.iter().find(|c| c.p == p && c.h == *h).map_or(String::new(), cell_text);
            write!(out, " {text} |")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn diagnostics_markdown<W: Write>(rows: &[DiagnosticRow], mut out: W) -> Result<()> {
    writeln!(out, "| domain | p | h | quantity | value |\n|---|---|---|---|---|")?;
    for r in rows {
        let p = r.p.map_or(String::new(), |p| p.to_string());
        let h = r.h.map_or(String::new(), |h| h.to_string());
        writeln!(out, "| {} | {p} | {h} | {} | {:.6e} |", r.domain, r.quantity, r.value)?;
    }
    Ok(())
}

pub fn emit_table<W: Write>(results: &[CellResult], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(results, &CELL_HEADERS, out),
        Format::Markdown => results_markdown(results, out),
    }
}

pub fn emit_diagnostics<W: Write>(rows: &[DiagnosticRow], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(rows, &DIAGNOSTIC_HEADERS, out),
        Format::Markdown => diagnostics_markdown(rows, out),
    }
}

/// Parses CSV written by [`emit_table`].
pub fn read_table<R: std::io::Read>(input: R) -> Result<Vec<CellResult>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
