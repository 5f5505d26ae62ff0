//! Line-delimited JSON logs. The first line is a header object with
//! `"type": "header"`; every following line is one [`StepRecord`].
//! Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use omniteleop_core::StepRecord;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const LOG_FORMAT: &str = "omniteleop-log/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "header")]
pub struct LogHeader {
    pub format: String,
    pub scenario: String,
    /// `idle`, `trace`, `decoupling`, `push_slide` or `live`.
    pub kind: String,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub decimation: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<usize>,
}

/// Writes the header, then every `decimation`-th record (the last tick of
/// each interval).
pub struct LogWriter<W: Write> {
    out: BufWriter<W>,
    decimation: u64,
    path: PathBuf,
}

impl LogWriter<File> {
    pub fn create(path: &Path, header: &LogHeader) -> AppResult<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| AppError::io(path, e))?;
        Self::new(file, path, header)
    }
}

impl<W: Write> LogWriter<W> {
    pub fn new(out: W, path: &Path, header: &LogHeader) -> AppResult<Self> {
        let mut w = Self {
            out: BufWriter::new(out),
            decimation: header.decimation.max(1),
            path: path.to_path_buf(),
        };
        w.line(header)?;
        Ok(w)
    }

    fn line<T: Serialize>(&mut self, value: &T) -> AppResult<()> {
        serde_json::to_writer(&mut self.out, value).map_err(|e| AppError::format(&self.path, e))?;
        self.out.write_all(b"\n").map_err(|e| AppError::io(&self.path, e))
    }

    pub fn keeps(&self, tick: u64) -> bool {
        tick % self.decimation == self.decimation - 1
    }

    pub fn record(&mut self, r: &StepRecord) -> AppResult<()> {
        if self.keeps(r.tick) {
            self.line(r)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> AppResult<W> {
        self.out.flush().map_err(|e| AppError::io(&self.path, e))?;
        self.out
            .into_inner()
            .map_err(|e| AppError::io(&self.path, e.into_error()))
    }
}

pub fn read_log(path: &Path) -> AppResult<(LogHeader, Vec<StepRecord>)> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_log(BufReader::new(file), path)
}

pub fn parse_log(reader: impl BufRead, path: &Path) -> AppResult<(LogHeader, Vec<StepRecord>)> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| AppError::format(path, "empty log"))?
        .map_err(|e| AppError::io(path, e))?;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| AppError::format(path, format!("header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| AppError::format(path, format!("line {}: {e}", i + 2)))?;
        records.push(r);
    }
    Ok((header, records))
}
