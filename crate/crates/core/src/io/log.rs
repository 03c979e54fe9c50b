use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::pipeline::{SessionSummary, TickReport};
use crate::quality::PerClass;
use crate::SCHEMA;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub schema: String,
    pub config_sha256: String,
    pub input: String,
}

impl LogHeader {
    pub fn new(config_sha256: impl Into<String>, input: impl Into<String>) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            config_sha256: config_sha256.into(),
            input: input.into(),
        }
    }
}

/// One tick as it appears in a log line and on the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRow {
    pub tick: u64,
    pub t_end_s: f64,
    pub quality: String,
    pub scores: PerClass<f64>,
    pub fhr_bpm: Option<f64>,
    pub fhr_rho: Option<f64>,
    pub fhr_absent_reason: Option<String>,
    pub ga_weeks: Option<f64>,
    pub ga_windows: u64,
    pub processing_ms: f64,
    pub deadline_missed: bool,
}

impl From<&TickReport> for TickRow {
    fn from(t: &TickReport) -> Self {
        Self {
            tick: t.tick_index,
            t_end_s: t.t_end_s,
            quality: t.quality.class.as_str().to_string(),
            scores: PerClass::from_array(t.quality.scores),
            fhr_bpm: t.fhr.map(|f| f.bpm),
            fhr_rho: t.fhr.map(|f| f.rho),
            fhr_absent_reason: t.fhr_absent_reason.clone(),
            ga_weeks: t.ga_running.as_ref().map(|g| g.weeks),
            ga_windows: t.ga_running.as_ref().map_or(0, |g| g.n_windows_used as u64),
            processing_ms: t.processing_ms,
            deadline_missed: t.deadline_missed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Footer {
    summary: SessionSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub rows: Vec<TickRow>,
    /// Absent when the writer never finished, e.g. a killed run.
    pub summary: Option<SessionSummary>,
}

fn line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("log records serialize")
}

/// Incremental log writer; every line is flushed as it is written so a
/// crash loses at most the line in progress.
pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, header: &LogHeader) -> Result<Self, IoError> {
        writeln!(out, "{}", line(header))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn row(&mut self, row: &TickRow) -> Result<(), IoError> {
        writeln!(self.out, "{}", line(row))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn tick(&mut self, t: &TickReport) -> Result<(), IoError> {
        self.row(&TickRow::from(t))
    }

    pub fn finish(mut self, summary: &SessionSummary) -> Result<W, IoError> {
        writeln!(
            self.out,
            "{}",
            line(&Footer {
                summary: summary.clone()
            })
        )?;
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_session<W: Write>(out: W, log: &SessionLog) -> Result<(), IoError> {
    let mut w = LogWriter::new(out, &log.header)?;
    for r in &log.rows {
        w.row(r)?;
    }
    if let Some(s) = &log.summary {
        w.finish(s)?;
    }
    Ok(())
}

fn mismatch(line: usize, reason: impl Into<String>) -> IoError {
    IoError::SchemaMismatch {
        line,
        reason: reason.into(),
    }
}

/// Parses a log. Line numbers in errors are 1-based.
pub fn read_session<R: BufRead>(input: R) -> Result<SessionLog, IoError> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| mismatch(1, "empty log"))??;
    let header: LogHeader =
        serde_json::from_str(&first).map_err(|e| mismatch(1, format!("bad header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(mismatch(
            1,
            format!("schema {:?}, expected {SCHEMA:?}", header.schema),
        ));
    }
    let mut rows: Vec<TickRow> = Vec::new();
    let mut summary = None;
    for (i, text) in lines.enumerate() {
        let n = i + 2;
        let text = text?;
        if summary.is_some() {
            if text.trim().is_empty() {
                continue;
            }
            return Err(mismatch(n, "content after the summary footer"));
        }
        if text.starts_with(r#"{"summary""#) {
            let f: Footer = serde_json::from_str(&text)
                .map_err(|e| mismatch(n, format!("bad footer: {e}")))?;
            summary = Some(f.summary);
            continue;
        }
        let row: TickRow =
            serde_json::from_str(&text).map_err(|e| mismatch(n, format!("bad row: {e}")))?;
        if let Some(prev) = rows.last() {
            if row.tick <= prev.tick {
                return Err(mismatch(
                    n,
                    format!("tick {} does not follow tick {}", row.tick, prev.tick),
                ));
            }
        }
        rows.push(row);
    }
    Ok(SessionLog {
        header,
        rows,
        summary,
    })
}
