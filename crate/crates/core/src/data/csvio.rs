//! CSV persistence for record streams.
//!
//! Schema (exact header): `timestamp,t_zone,t_neigh,t_out,solar,power,mode`
//! with ISO-8601 UTC timestamps and mode `H` or `C`. Floats are written in
//! shortest round-trip form, so write-then-read returns identical values.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::{Mode, RawRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "timestamp,t_zone,t_neigh,t_out,solar,power,mode";

/// A row that could not be used, kept so callers can see what was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapReport {
    /// 1-based line number in the file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub records: Vec<RawRecord>,
    pub gaps: Vec<GapReport>,
}

pub fn save_csv(path: &Path, records: &[RawRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            r.t_zone,
            r.t_neigh,
            r.t_out,
            r.solar,
            r.power,
            r.mode.as_char()
        )?;
    }
    Ok(())
}

/// Parse a record stream. Malformed timestamps and out-of-order rows are
/// hard errors (the time axis must be trustworthy); rows with unparsable
/// value fields are reported as gaps and excluded, never silently dropped.
pub fn load_csv(path: &Path) -> Result<CsvLoad> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))??;
    if header.trim() != CSV_HEADER {
        return Err(Error::Data(format!(
            "{}: header mismatch, expected `{CSV_HEADER}`, got `{}`",
            path.display(),
            header.trim()
        )));
    }

    let mut records: Vec<RawRecord> = Vec::new();
    let mut gaps = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2; // 1-based, after header
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            gaps.push(GapReport {
                line: line_no,
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
            continue;
        }
        let timestamp = DateTime::parse_from_rfc3339(fields[0])
            .map_err(|e| Error::Data(format!("line {line_no}: bad timestamp: {e}")))?
            .with_timezone(&Utc);
        if let Some(last) = records.last() {
            if timestamp <= last.timestamp {
                return Err(Error::Data(format!(
                    "line {line_no}: timestamp {timestamp} not after previous {}",
                    last.timestamp
                )));
            }
        }
        let mut parse_f = |idx: usize, name: &str| -> std::result::Result<f64, String> {
            fields[idx]
                .parse::<f64>()
                .map_err(|e| format!("{name}: {e}"))
        };
        let values = (|| -> std::result::Result<(f64, f64, f64, f64, f64), String> {
            Ok((
                parse_f(1, "t_zone")?,
                parse_f(2, "t_neigh")?,
                parse_f(3, "t_out")?,
                parse_f(4, "solar")?,
                parse_f(5, "power")?,
            ))
        })();
        let (t_zone, t_neigh, t_out, solar, power) = match values {
            Ok(v) => v,
            Err(reason) => {
                gaps.push(GapReport {
                    line: line_no,
                    reason,
                });
                continue;
            }
        };
        let mode = match fields[6].trim().chars().next().and_then(Mode::from_char) {
            Some(m) => m,
            None => {
                gaps.push(GapReport {
                    line: line_no,
                    reason: format!("mode must be H or C, got `{}`", fields[6]),
                });
                continue;
            }
        };
        if solar < 0.0 {
            gaps.push(GapReport {
                line: line_no,
                reason: format!("negative solar {solar}"),
            });
            continue;
        }
        if !mode.sign_ok(power) {
            gaps.push(GapReport {
                line: line_no,
                reason: format!("power {power} inconsistent with mode {}", mode.as_char()),
            });
            continue;
        }
        records.push(RawRecord {
            timestamp,
            t_zone,
            t_neigh,
            t_out,
            solar,
            power,
            mode,
        });
    }
    Ok(CsvLoad { records, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    #[test]
    fn round_trip_returns_identical_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let records = generate_synthetic(4, 0).unwrap();
        save_csv(&path, &records).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert!(loaded.gaps.is_empty());
        assert_eq!(loaded.records, records);
    }

    #[test]
    fn missing_column_in_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "timestamp,t_zone,t_neigh,t_out,solar,power\n").unwrap();
        assert!(load_csv(&path).is_err());
    }

    #[test]
    fn malformed_timestamp_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            format!("{CSV_HEADER}\nnot-a-time,21,21,5,0,0,H\n"),
        )
        .unwrap();
        let err = load_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unparsable_value_becomes_explicit_gap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gappy.csv");
        std::fs::write(
            &path,
            format!(
                "{CSV_HEADER}\n2021-01-01T00:00:00Z,21,21,5,0,0,H\n2021-01-01T00:15:00Z,oops,21,5,0,0,H\n2021-01-01T00:30:00Z,21.1,21,5,0,0,H\n"
            ),
        )
        .unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.gaps.len(), 1);
        assert_eq!(loaded.gaps[0].line, 3);
    }
}
