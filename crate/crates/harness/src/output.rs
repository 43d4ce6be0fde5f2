//! CSV and JSON emission. Floats are written in shortest round-trip form,
//! independent of locale, so identical results give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use banco_core::LedgerReport;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentSpec;
use crate::runner::{ExperimentOutput, ResultRow, Summary, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Top-level object of the JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub ledger: LedgerReport,
}

pub fn csv_bytes(rows: &[ResultRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(ResultRow::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().context("flushing csv buffer")
}

pub fn json_bytes(output: &ExperimentOutput) -> anyhow::Result<Vec<u8>> {
    let report = JsonReport {
        spec: output.spec.clone(),
        rows: output.rows.clone(),
        summary: output.summary.clone(),
        ledger: output.ledger.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `results.csv` and/or `results.json` into `dir` (created if
/// missing) and returns the paths written.
pub fn emit_results(output: &ExperimentOutput, formats: &[Format], dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written = Vec::new();
    for format in formats {
        let (name, bytes) = match format {
            Format::Csv => ("results.csv", csv_bytes(&output.rows)?),
            Format::Json => ("results.json", json_bytes(output)?),
        };
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// One CSV per traced run under `dir/traces`: step, magnitude, coin, then
/// the direction and gradient coordinates.
pub fn emit_traces(traces: &[TraceRecord], dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if traces.is_empty() {
        return Ok(Vec::new());
    }
    let dir = dir.join("traces");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for rec in traces {
        let d = rec.trace.directions.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string(), "magnitude".into(), "coin".into()];
        header.extend((0..d).map(|i| format!("q{i}")));
        header.extend((0..d).map(|i| format!("g{i}")));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        for t in 0..rec.trace.len() {
            let mut record = vec![(t + 1).to_string(), rec.trace.magnitudes[t].to_string(), rec.trace.coins[t].to_string()];
            record.extend(rec.trace.directions[t].iter().map(f64::to_string));
            record.extend(rec.trace.gradients[t].iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        let name: String = format!("{}_T{}_seed{}.csv", rec.optimizer, rec.horizon, rec.seed)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
            .collect();
        let path = dir.join(name);
        write_file(&path, &w.into_inner().context("flushing trace buffer")?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only_csv() {
        let bytes = csv_bytes(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), ResultRow::HEADER.join(",") + "\n");
    }
}
