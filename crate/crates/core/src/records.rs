//! Line-delimited JSON record files.
//!
//! A file is a sequence of lines, each either a run header
//! `{"schema_version": 1, "config": {...}}` or one [`SurvivalRecord`].
//! Files are append-only; a truncated final line (an interrupted write) is
//! skipped with a warning.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{SurvivalRecord, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: schema version {found}, expected {expected}")]
    SchemaVersion {
        line: usize,
        found: u64,
        expected: u32,
    },
}

/// First line of a result file: the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema_version: u32,
    pub config: RunConfig,
}

impl RunHeader {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    pub headers: Vec<RunHeader>,
    pub records: Vec<SurvivalRecord>,
}

impl RecordSet {
    pub fn extend(&mut self, other: RecordSet) {
        self.headers.extend(other.headers);
        self.records.extend(other.records);
    }
}

pub fn write_header<W: Write>(mut w: W, header: &RunHeader) -> io::Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")
}

pub fn write_record<W: Write>(mut w: W, record: &SurvivalRecord) -> io::Result<()> {
    serde_json::to_writer(&mut w, record)?;
    w.write_all(b"\n")
}

pub fn write_records<W: Write>(mut w: W, records: &[SurvivalRecord]) -> io::Result<()> {
    for r in records {
        write_record(&mut w, r)?;
    }
    Ok(())
}

/// Parses a record stream. See the module docs for the line format.
pub fn parse_records<R: Read>(reader: R) -> Result<RecordSet, RecordsError> {
    let mut text = String::new();
    BufReader::new(reader)
        .read_to_string(&mut text)
        .map_err(|source| RecordsError::Io {
            path: PathBuf::from("<stream>"),
            source,
        })?;
    let complete = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut set = RecordSet::default();
    for (i, raw) in lines.iter().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let last = i + 1 == lines.len();
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) if last && !complete => {
                log::warn!("skipping truncated final line {line_no}: {e}");
                break;
            }
            Err(e) => {
                return Err(RecordsError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        match version {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(found) => {
                return Err(RecordsError::SchemaVersion {
                    line: line_no,
                    found,
                    expected: SCHEMA_VERSION,
                })
            }
            None => {
                return Err(RecordsError::Malformed {
                    line: line_no,
                    message: "missing schema_version".into(),
                })
            }
        }
        let malformed = |e: serde_json::Error| RecordsError::Malformed {
            line: line_no,
            message: e.to_string(),
        };
        if value.get("config").is_some() {
            set.headers
                .push(serde_json::from_value(value).map_err(malformed)?);
        } else {
            set.records
                .push(serde_json::from_value(value).map_err(malformed)?);
        }
    }
    Ok(set)
}

pub fn read_records(path: &Path) -> Result<RecordSet, RecordsError> {
    let file = File::open(path).map_err(|source| RecordsError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_records(file).map_err(|e| match e {
        RecordsError::Io { source, .. } => RecordsError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

/// Appends records to a file, one flushed line per record.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn append(path: &Path) -> Result<Self, RecordsError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| RecordsError::Io {
                path: path.to_owned(),
                source,
            })?;
        Ok(Self {
            path: path.to_owned(),
            out: BufWriter::new(file),
        })
    }

    fn io(&self, source: io::Error) -> RecordsError {
        RecordsError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn header(&mut self, header: &RunHeader) -> Result<(), RecordsError> {
        write_header(&mut self.out, header)
            .and_then(|_| self.out.flush())
            .map_err(|e| self.io(e))
    }

    pub fn record(&mut self, record: &SurvivalRecord) -> Result<(), RecordsError> {
        write_record(&mut self.out, record)
            .and_then(|_| self.out.flush())
            .map_err(|e| self.io(e))
    }
}

/// Writes `header` and `records` to `path` atomically (temp file + rename).
pub fn write_record_file(
    path: &Path,
    header: Option<&RunHeader>,
    records: &[SurvivalRecord],
) -> Result<(), RecordsError> {
    let tmp = path.with_extension("tmp");
    let io_err = |source| RecordsError::Io {
        path: tmp.clone(),
        source,
    };
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io_err)?);
        if let Some(h) = header {
            write_header(&mut w, h).map_err(io_err)?;
        }
        write_records(&mut w, records).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(|source| RecordsError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads every path and concatenates the record sets.
pub fn read_all<P: AsRef<Path>>(paths: &[P]) -> Result<RecordSet, RecordsError> {
    let mut set = RecordSet::default();
    for p in paths {
        set.extend(read_records(p.as_ref())?);
    }
    Ok(set)
}

/// Minimal CSV writer for summary tables. Fields are written verbatim, so
/// callers pass plain numbers and identifiers.
pub struct CsvTable<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvTable<W> {
    pub fn new(mut out: W, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> io::Result<()> {
        assert_eq!(fields.len(), self.columns, "row width");
        let line: Vec<&str> = fields.iter().map(|f| f.as_ref()).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
