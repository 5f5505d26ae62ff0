//! Headless runs of a resolved [`Scenario`].

use std::io::Write;
use std::path::{Path, PathBuf};

use omniteleop_core::experiments::{run_decoupling_repetition, run_push_slide, CouplingReport, PushSlideReport, Stat};
use omniteleop_core::operator::{Idle, Operator};
use omniteleop_core::{StepRecord, World};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, Scenario};
use crate::error::{AppError, AppResult};
use crate::log::{LogHeader, LogWriter, LOG_FORMAT};
use crate::trace::read_trace;

pub const LOG_DIR_ENV: &str = "OMNITELEOP_LOG_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalPose {
    pub position: [f64; 3],
    /// `[w, x, y, z]`
    pub orientation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushSlideSummary {
    pub contact_onset: f64,
    pub push_force: Stat,
    pub predicted_force: f64,
    pub up_torque: f64,
    pub down_torque: f64,
    pub up_normal: f64,
    pub down_normal: f64,
    pub signature_holds: bool,
}

impl From<&PushSlideReport> for PushSlideSummary {
    fn from(r: &PushSlideReport) -> Self {
        Self {
            contact_onset: r.contact_onset,
            push_force: r.push_force,
            predicted_force: r.predicted_force,
            up_torque: r.up_torque,
            down_torque: r.down_torque,
            up_normal: r.up_normal,
            down_normal: r.down_normal,
            signature_holds: r.signature_holds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub kind: String,
    pub ticks: u64,
    pub final_pose: FinalPose,
    pub max_contact_force: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub push_slide: Option<PushSlideSummary>,
}

impl Summary {
    /// Human-readable lines for the terminal.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let p = self.final_pose.position;
        let q = self.final_pose.orientation;
        s += &format!("scenario      {} ({})\n", self.scenario, self.kind);
        s += &format!("ticks         {}\n", self.ticks);
        s += &format!("final p_S     [{:.6}, {:.6}, {:.6}] m\n", p[0], p[1], p[2]);
        s += &format!("final q_S     [{:.6}, {:.6}, {:.6}, {:.6}]\n", q[0], q[1], q[2], q[3]);
        s += &format!("max |f_K|     {:.4} N\n", self.max_contact_force);
        if let Some(c) = &self.coupling {
            s += &format!("repetitions   {}\n", c.repetitions.len());
            for a in &c.axes {
                s += &format!(
                    "  {}  on-axis {:.5} ± {:.1e}  ratio {:.5} ± {:.1e}\n",
                    a.axis, a.on_peak.mean, a.on_peak.std, a.ratio.mean, a.ratio.std
                );
            }
        }
        if let Some(r) = &self.push_slide {
            s += &format!("contact onset {:.3} s\n", r.contact_onset);
            s += &format!(
                "push force    {:.3} ± {:.3} N (predicted {:.3} N)\n",
                r.push_force.mean, r.push_force.std, r.predicted_force
            );
            s += &format!(
                "slide torque  up {:+.3} N·m, down {:+.3} N·m\n",
                r.up_torque, r.down_torque
            );
            s += &format!(
                "friction sign {}\n",
                if r.signature_holds { "up +, down −" } else { "absent" }
            );
        }
        s
    }
}

struct Outcome<W> {
    log: W,
    final_pose: FinalPose,
    max_contact_force: f64,
}

fn header(scenario: &Scenario, repetition: Option<usize>) -> LogHeader {
    LogHeader {
        format: LOG_FORMAT.into(),
        scenario: scenario.name.clone(),
        kind: scenario.experiment.kind().into(),
        dt: scenario.params.dt,
        duration: scenario.duration,
        seed: scenario.params.seed,
        decimation: scenario.decimation,
        repetition,
    }
}

/// Tracks what the summary needs while records stream to the log.
struct Tap<W: Write> {
    log: LogWriter<W>,
    error: Option<AppError>,
    last: Option<FinalPose>,
    max_contact_force: f64,
}

impl<W: Write> Tap<W> {
    fn new(log: LogWriter<W>) -> Self {
        Self {
            log,
            error: None,
            last: None,
            max_contact_force: 0.0,
        }
    }

    fn observe(&mut self, r: &StepRecord) {
        self.max_contact_force = self.max_contact_force.max(r.contact_force());
        if self.error.is_none() {
            if let Err(e) = self.log.record(r) {
                self.error = Some(e);
            }
        }
        self.last = Some(FinalPose {
            position: r.p_s,
            orientation: r.q_s,
        });
    }

    fn finish(self, initial: FinalPose) -> AppResult<Outcome<W>> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(Outcome {
            log: self.log.finish()?,
            final_pose: self.last.unwrap_or(initial),
            max_contact_force: self.max_contact_force,
        })
    }
}

/// Runs `scenario`, opening one log per run through `open`. Returns the
/// summary and the logs in repetition order.
pub fn execute<W, F>(scenario: &Scenario, open: F) -> AppResult<(Summary, Vec<W>)>
where
    W: Write + Send,
    F: Fn(&LogHeader) -> AppResult<LogWriter<W>> + Sync,
{
    scenario.validate()?;
    let params = &scenario.params;
    let initial_pose = FinalPose {
        position: scenario.initial.vehicle.position.into(),
        orientation: scenario.initial.vehicle.orientation.wxyz(),
    };
    let ticks = params.ticks(scenario.duration);
    let mut summary = Summary {
        scenario: scenario.name.clone(),
        kind: scenario.experiment.kind().into(),
        ticks,
        final_pose: initial_pose.clone(),
        max_contact_force: 0.0,
        coupling: None,
        push_slide: None,
    };

    let outcomes = match &scenario.experiment {
        Experiment::Idle | Experiment::Trace(_) => {
            let mut operator: Box<dyn Operator> = match &scenario.experiment {
                Experiment::Trace(path) => Box::new(read_trace(path)?),
                _ => Box::new(Idle),
            };
            let mut tap = Tap::new(open(&header(scenario, None))?);
            let mut world = World::new(params.clone(), scenario.initial)?;
            world.run(operator.as_mut(), ticks, |r| tap.observe(r))?;
            vec![tap.finish(initial_pose)?]
        }
        Experiment::PushSlide(script) => {
            let mut tap = Tap::new(open(&header(scenario, None))?);
            let report = run_push_slide(params, scenario.initial, script, |r| tap.observe(r))?;
            summary.push_slide = Some(PushSlideSummary::from(&report));
            vec![tap.finish(initial_pose)?]
        }
        Experiment::Decoupling(trial) => {
            let runs = (0..trial.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let mut tap = Tap::new(open(&header(scenario, Some(rep)))?);
                    let coupling = run_decoupling_repetition(params, trial, rep, |r| tap.observe(r))?;
                    Ok((coupling, tap.finish(initial_pose.clone())?))
                })
                .collect::<AppResult<Vec<_>>>()?;
            let (couplings, outcomes): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
            summary.coupling = Some(CouplingReport::aggregate(couplings)?);
            outcomes
        }
    };

    if let Some(last) = outcomes.last() {
        summary.final_pose = last.final_pose.clone();
    }
    summary.max_contact_force = outcomes.iter().fold(0.0, |m, o| m.max(o.max_contact_force));
    Ok((summary, outcomes.into_iter().map(|o| o.log).collect()))
}

/// Log path for one run: `<out>` itself, or `<stem>_rep<k>.jsonl` beside it
/// for repetitions.
pub fn log_path(out: &Path, repetition: Option<usize>) -> PathBuf {
    match repetition {
        None => out.to_path_buf(),
        Some(k) => {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.with_file_name(format!("{stem}_rep{k}.jsonl"))
        }
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.json"))
}

/// `--out` if given, else `<OMNITELEOP_LOG_DIR or runs>/<scenario>.jsonl`.
pub fn default_output(scenario: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        let dir = std::env::var_os(LOG_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        dir.join(format!("{}.jsonl", scenario.name))
    })
}

/// Runs to files and writes the summary as JSON beside the log.
pub fn run_to_files(scenario: &Scenario, out: &Path) -> AppResult<(Summary, Vec<PathBuf>)> {
    let paths = std::sync::Mutex::new(Vec::new());
    let (summary, _) = execute(scenario, |h| {
        let path = log_path(out, h.repetition);
        let w = LogWriter::create(&path, h)?;
        paths.lock().unwrap().push((h.repetition, path));
        Ok(w)
    })?;
    let mut paths = paths.into_inner().unwrap();
    paths.sort();
    let summary_file = summary_path(out);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| AppError::format(&summary_file, e))?;
    std::fs::write(&summary_file, json + "\n").map_err(|e| AppError::io(&summary_file, e))?;
    Ok((summary, paths.into_iter().map(|(_, p)| p).collect()))
}
