//! Input logs of live sessions and their headless replay.
//!
//! An input log is line-delimited JSON: a header line, one line per change
//! of the held operator input (keyed by the tick it first applies to), and
//! a closing line with the total tick count.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use omniteleop_core::operator::Replay;
use omniteleop_core::{OperatorInput, World};
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::error::{AppError, AppResult};
use crate::log::{LogHeader, LogWriter, LOG_FORMAT};
use crate::protocol::{InputEvent, Mode};

pub const INPUT_FORMAT: &str = "omniteleop-inputs/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InputLine {
    Header {
        format: String,
        scenario: String,
        dt: f64,
        seed: u64,
    },
    /// `event` is `None` when the driver left and the handle was released.
    Input {
        tick: u64,
        event: Option<InputEvent>,
    },
    End {
        ticks: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputLog {
    pub dt: f64,
    pub seed: u64,
    pub events: Vec<(u64, Option<InputEvent>)>,
    /// Ticks stepped by the session; `None` if the log was cut short.
    pub ticks: Option<u64>,
}

impl InputLog {
    pub fn read(path: &Path) -> AppResult<Self> {
        let file = File::open(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(BufReader::new(file), path)
    }

    pub fn parse(reader: impl BufRead, path: &Path) -> AppResult<Self> {
        let mut log = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AppError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: InputLine =
                serde_json::from_str(&line).map_err(|e| AppError::format(path, format!("line {}: {e}", i + 1)))?;
            match (parsed, &mut log) {
                (InputLine::Header { dt, seed, .. }, None) => {
                    log = Some(InputLog {
                        dt,
                        seed,
                        events: Vec::new(),
                        ticks: None,
                    })
                }
                (InputLine::Input { tick, event }, Some(l)) if l.ticks.is_none() => l.events.push((tick, event)),
                (InputLine::End { ticks }, Some(l)) if l.ticks.is_none() => l.ticks = Some(ticks),
                _ => return Err(AppError::format(path, format!("line {}: out of place", i + 1))),
            }
        }
        log.ok_or_else(|| AppError::format(path, "missing header"))
    }

    /// Ticks to replay: the recorded count, or one past the last event.
    pub fn span(&self) -> u64 {
        self.ticks
            .unwrap_or_else(|| self.events.last().map_or(0, |(t, _)| t + 1))
    }

    pub fn operator(&self) -> Replay {
        Replay::new(
            self.events
                .iter()
                .map(|(tick, e)| (*tick, e.map_or_else(OperatorInput::idle, |e| e.to_input())))
                .collect(),
        )
    }
}

/// Writes input-log lines as they happen.
pub struct InputRecorder<W: Write> {
    out: W,
}

impl<W: Write> InputRecorder<W> {
    pub fn new(mut out: W, scenario: &Scenario) -> std::io::Result<Self> {
        let header = InputLine::Header {
            format: INPUT_FORMAT.into(),
            scenario: scenario.name.clone(),
            dt: scenario.params.dt,
            seed: scenario.params.seed,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        Ok(Self { out })
    }

    pub fn input(&mut self, tick: u64, event: Option<InputEvent>) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{}",
            serde_json::to_string(&InputLine::Input { tick, event })?
        )
    }

    pub fn end(mut self, ticks: u64) -> std::io::Result<W> {
        writeln!(self.out, "{}", serde_json::to_string(&InputLine::End { ticks })?)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reruns a recorded session headless and writes its log. The scenario must
/// be the one the session ran with.
pub fn replay<W: Write>(scenario: &Scenario, inputs: &InputLog, log: LogWriter<W>) -> AppResult<W> {
    if inputs.dt != scenario.params.dt || inputs.seed != scenario.params.seed {
        return Err(AppError::Config {
            path: "sim".into(),
            msg: format!(
                "input log was recorded with dt = {}, seed = {}; scenario has dt = {}, seed = {}",
                inputs.dt, inputs.seed, scenario.params.dt, scenario.params.seed
            ),
        });
    }
    let mut world = World::new(scenario.params.clone(), scenario.initial)?;
    let mut log = log;
    let mut error = None;
    world.run(&mut inputs.operator(), inputs.span(), |r| {
        if error.is_none() {
            error = log.record(r).err();
        }
    })?;
    if let Some(e) = error {
        return Err(e);
    }
    log.finish()
}

pub fn session_header(scenario: &Scenario, kind: &str, ticks: u64) -> LogHeader {
    LogHeader {
        format: LOG_FORMAT.into(),
        scenario: scenario.name.clone(),
        kind: kind.into(),
        dt: scenario.params.dt,
        duration: ticks as f64 * scenario.params.dt,
        seed: scenario.params.seed,
        decimation: scenario.decimation,
        repetition: None,
    }
}

/// Pose-mode event, the default for live sessions.
pub fn pose_event(t_ms: f64, v: [f64; 6]) -> InputEvent {
    InputEvent {
        mode: Mode::Pose,
        t: t_ms,
        v,
    }
}
