//! Records and history files.
//!
//! Records: `code,latency_ms,accuracy`, one trained architecture per row.
//! History: `iteration,code,latency_ms,accuracy,trained,pruned,frontier_changed`.
//! Accuracies are read as fractions or `%`-suffixed percentages and always
//! written as fractions.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::eval::parse_accuracy;
use crate::latency::Latency;
use crate::search::{HistoryEntry, TrainedRecord};

pub const RECORDS_HEADER: [&str; 3] = ["code", "latency_ms", "accuracy"];
pub const HISTORY_HEADER: [&str; 7] = [
    "iteration",
    "code",
    "latency_ms",
    "accuracy",
    "trained",
    "pruned",
    "frontier_changed",
];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn malformed(line: u64, msg: impl Into<String>) -> RecordsError {
    RecordsError::Malformed {
        line,
        msg: msg.into(),
    }
}

type Row<E> = (E, Latency, Option<f64>, u64);

/// Rows of a records file; the accuracy column is `None` when `need_accuracy` is false.
fn read_rows<E>(text: &str, need_accuracy: bool) -> Result<Vec<Row<E>>, RecordsError>
where
    E: FromStr,
    E::Err: Display,
{
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected = if need_accuracy {
        &RECORDS_HEADER[..]
    } else {
        &RECORDS_HEADER[..2]
    };
    if header.len() < expected.len() || header[..expected.len()] != *expected {
        return Err(malformed(
            1,
            format!("expected header `{}`", RECORDS_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() < expected.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", expected.len(), row.len()),
            ));
        }
        let code: E = row[0]
            .parse()
            .map_err(|e| malformed(line, format!("{e}")))?;
        let latency: Latency = row[1]
            .parse()
            .map_err(|e| malformed(line, format!("{e}")))?;
        let accuracy = if need_accuracy {
            let a = parse_accuracy(&row[2]).ok_or_else(|| {
                malformed(
                    line,
                    format!(
                        "accuracy `{}` is not a fraction in [0,1] or a percentage",
                        &row[2]
                    ),
                )
            })?;
            Some(a)
        } else {
            None
        };
        rows.push((code, latency, accuracy, line));
    }
    Ok(rows)
}

pub fn parse_records<E>(text: &str) -> Result<Vec<TrainedRecord<E>>, RecordsError>
where
    E: FromStr,
    E::Err: Display,
{
    Ok(read_rows(text, true)?
        .into_iter()
        .enumerate()
        .map(|(i, (code, latency, accuracy, _))| TrainedRecord {
            code,
            latency,
            accuracy: accuracy.expect("accuracy requested"),
            iteration: i + 1,
        })
        .collect())
}

fn read(path: &Path) -> Result<String, RecordsError> {
    fs::read_to_string(path).map_err(|source| RecordsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_records<E>(path: &Path) -> Result<Vec<TrainedRecord<E>>, RecordsError>
where
    E: FromStr,
    E::Err: Display,
{
    parse_records(&read(path)?)
}

/// Reads `code,latency_ms[,…]`, ignoring any accuracy column; duplicate codes are an error.
pub fn load_latencies<E>(path: &Path) -> Result<Vec<(E, Latency)>, RecordsError>
where
    E: FromStr + Ord + Display,
    E::Err: Display,
{
    let rows = read_rows::<E>(&read(path)?, false)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (code, lat, _, line) in rows {
        if !seen.insert(code.to_string()) {
            return Err(malformed(line, format!("{code} appears more than once")));
        }
        out.push((code, lat));
    }
    Ok(out)
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

pub fn write_records<E: Display, W: Write>(
    records: &[TrainedRecord<E>],
    out: W,
) -> Result<(), RecordsError> {
    let mut w = writer(out);
    if !records.is_empty() {
        w.write_record(RECORDS_HEADER)?;
    }
    for r in records {
        w.write_record([
            r.code.to_string(),
            r.latency.to_string(),
            r.accuracy.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_history<E: Display, W: Write>(
    history: &[HistoryEntry<E>],
    out: W,
) -> Result<(), RecordsError> {
    let mut w = writer(out);
    w.write_record(HISTORY_HEADER)?;
    for h in history {
        w.write_record([
            h.iteration.to_string(),
            h.code.to_string(),
            h.latency.to_string(),
            h.accuracy.to_string(),
            h.trained.to_string(),
            h.pruned.map_or_else(|| "NA".to_string(), |p| p.to_string()),
            h.frontier_changed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ArchitectureCode;

    #[test]
    fn records_round_trip() {
        let text = "code,latency_ms,accuracy\n\"[(64,64,64),(128,128,128),(256,256,256,512)]\",2.5,69.8%\n\"[(64),(64),(64)]\",0.9,0.5\n";
        let rs: Vec<TrainedRecord<ArchitectureCode>> = parse_records(text).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[0].accuracy, 0.698);
        assert_eq!(rs[0].latency, "2.5".parse().unwrap());
        assert_eq!(rs[1].iteration, 2);
        let mut buf = Vec::new();
        write_records(&rs, &mut buf).unwrap();
        let back: Vec<TrainedRecord<ArchitectureCode>> =
            parse_records(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, rs);
    }

    #[test]
    fn empty_inputs_and_outputs() {
        assert!(parse_records::<ArchitectureCode>("").unwrap().is_empty());
        assert!(
            parse_records::<ArchitectureCode>("code,latency_ms,accuracy\n")
                .unwrap()
                .is_empty()
        );
        let mut buf = Vec::new();
        write_records::<ArchitectureCode, _>(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn bad_rows() {
        let bad_acc = "code,latency_ms,accuracy\n\"[(64),(64),(64)]\",1,1.5\n";
        assert!(matches!(
            parse_records::<ArchitectureCode>(bad_acc),
            Err(RecordsError::Malformed { line: 2, .. })
        ));
        let bad_code = "code,latency_ms,accuracy\n\"[(64),(32),(64)]\",1,0.5\n";
        assert!(matches!(
            parse_records::<ArchitectureCode>(bad_code),
            Err(RecordsError::Malformed { .. })
        ));
        assert!(matches!(
            parse_records::<ArchitectureCode>("a,b,c\n"),
            Err(RecordsError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn latency_only_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lat.csv");
        fs::write(&p, "code,latency_ms\n\"19:[32,32,32]\",1.5\n").unwrap();
        let v: Vec<(crate::decoder::DecoderCode, Latency)> = load_latencies(&p).unwrap();
        assert_eq!(v[0].1, "1.5".parse().unwrap());
        fs::write(
            &p,
            "code,latency_ms,accuracy\n\"19:[32,32,32]\",1.5,0.1\n\"19:[32,32,32]\",2,0.1\n",
        )
        .unwrap();
        assert!(load_latencies::<crate::decoder::DecoderCode>(&p).is_err());
    }

    #[test]
    fn history_marks_unmaterialized_counts() {
        let h = [HistoryEntry {
            iteration: 1,
            code: "c".to_string(),
            latency: "1.25".parse().unwrap(),
            accuracy: 0.5,
            trained: 1,
            pruned: None,
            frontier_changed: true,
        }];
        let mut buf = Vec::new();
        write_history(&h, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,code,latency_ms,accuracy,trained,pruned,frontier_changed\n1,c,1.25,0.5,1,NA,true\n"
        );
    }
}
