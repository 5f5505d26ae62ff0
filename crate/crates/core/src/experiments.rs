//! Scripted experiments: single-axis decoupling trials with coupling
//! metrics, and the push-and-slide contact task.

use alloc::vec::Vec;
use core::fmt;

use crate::contact::WallModel;
use crate::error::{ensure, Error, Result};
use crate::geom::{Rotation, Vec3};
use crate::operator::{Grip, Phase, ScriptedOperator, Tremor};
use crate::world::{InitialState, SimParams, StepRecord, World};

/// One of the six input axes of the handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Axis {
    Tx,
    Ty,
    Tz,
    Rx,
    Ry,
    Rz,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::Tx, Axis::Ty, Axis::Tz, Axis::Rx, Axis::Ry, Axis::Rz];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["tx", "ty", "tz", "rx", "ry", "rz"][self.index()]
    }

    pub fn is_translation(self) -> bool {
        self.index() < 3
    }

    /// The other five axes in ascending order.
    pub fn others(self) -> [Axis; 5] {
        let mut out = [Axis::Tx; 5];
        let mut k = 0;
        for a in Axis::ALL {
            if a != self {
                out[k] = a;
                k += 1;
            }
        }
        out
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Interval of normalized time `[start, end)` during which one axis is commanded.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisWindow {
    pub axis: Axis,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingTrial {
    /// Trial length `T` [s].
    pub duration: f64,
    pub schedule: Vec<AxisWindow>,
    /// Feedforward magnitude per axis [N | N·m]. The grip holds the
    /// commanded axis where this wrench balances the recentering spring.
    pub profile: [f64; 6],
    /// Fractions of each window at which the push begins and is released.
    pub press: f64,
    pub release: f64,
    pub repetitions: usize,
    /// Tremor force standard deviation [N]; zero disables it.
    pub tremor: f64,
    /// Tremor torque per unit tremor force [m].
    pub tremor_lever: f64,
    /// Tremor correlation time [s].
    pub tremor_tau: f64,
    pub grip: Grip,
}

impl Default for DecouplingTrial {
    fn default() -> Self {
        let w = |axis, start, end| AxisWindow { axis, start, end };
        Self {
            duration: 30.0,
            schedule: alloc::vec![
                w(Axis::Tx, 0.0, 0.15),
                w(Axis::Ty, 0.15, 0.3),
                w(Axis::Tz, 0.3, 0.5),
                w(Axis::Rx, 0.5, 0.65),
                w(Axis::Ry, 0.65, 0.8),
                w(Axis::Rz, 0.8, 1.0),
            ],
            profile: [5.0, 5.0, 5.0, 0.5, 0.5, 0.5],
            press: 0.1,
            release: 0.7,
            repetitions: 5,
            tremor: 0.0,
            tremor_lever: 0.1,
            tremor_tau: 0.1,
            grip: Grip::default(),
        }
    }
}

impl DecouplingTrial {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.duration > 0.0 && self.duration.is_finite(),
            "trial.duration",
            "must be positive",
        )?;
        ensure(!self.schedule.is_empty(), "trial.schedule", "must not be empty")?;
        for (i, w) in self.schedule.iter().enumerate() {
            ensure(
                0.0 <= w.start && w.start < w.end && w.end <= 1.0,
                "trial.schedule",
                "windows must satisfy 0 <= start < end <= 1",
            )?;
            if i > 0 {
                ensure(
                    self.schedule[i - 1].end <= w.start,
                    "trial.schedule",
                    "windows must be ordered and non-overlapping",
                )?;
            }
        }
        ensure(
            0.0 <= self.press && self.press < self.release && self.release <= 1.0,
            "trial.press",
            "need 0 <= press < release <= 1",
        )?;
        ensure(self.repetitions > 0, "trial.repetitions", "must be at least 1")?;
        ensure(
            self.tremor >= 0.0 && self.tremor_lever >= 0.0 && self.tremor_tau > 0.0,
            "trial.tremor",
            "amplitude and lever must be non-negative, tau positive",
        )?;
        ensure(
            self.profile.iter().all(|x| x.is_finite()),
            "trial.profile",
            "must be finite",
        )
    }

    /// Operator phases in seconds for the given policy stiffness.
    pub fn phases(&self, params: &SimParams) -> Result<Vec<Phase>> {
        let k = params.policy.recentering_stiffness.0;
        let mut phases = Vec::with_capacity(self.schedule.len());
        for w in &self.schedule {
            let i = w.axis.index();
            ensure(
                k[i] > 0.0,
                "policy.recentering_stiffness",
                "commanded axes need positive stiffness",
            )?;
            let target = self.profile[i] / k[i];
            if !w.axis.is_translation() {
                ensure(
                    target.abs() < 1.0,
                    "trial.profile",
                    "rotational target exceeds the sin range",
                )?;
            }
            let span = (w.end - w.start) * self.duration;
            let start = w.start * self.duration + self.press * span;
            let end = w.start * self.duration + self.release * span;
            phases.push(Phase::single_axis(start, end, i, self.profile[i], target));
        }
        Ok(phases)
    }
}

/// Coupling of one commanded axis within its window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisCoupling {
    pub axis: Axis,
    /// Peak `|reference|` on the commanded axis.
    pub on_peak: f64,
    /// Peaks on the other axes, ordered as [`Axis::others`].
    pub off_peaks: [f64; 5],
    /// `max(off_peaks) / on_peak`.
    pub ratio: f64,
}

/// Tracks per-window peaks of the body-frame reference twist over normalized time.
#[derive(Debug, Clone)]
pub struct CouplingMeter {
    windows: Vec<AxisWindow>,
    peaks: Vec<[f64; 6]>,
}

impl CouplingMeter {
    pub fn new(windows: &[AxisWindow]) -> Self {
        Self {
            windows: windows.to_vec(),
            peaks: alloc::vec![[0.0; 6]; windows.len()],
        }
    }

    /// `tn` is normalized time `t / T`; `reference` is `[v; ω]`.
    pub fn observe(&mut self, tn: f64, reference: &[f64; 6]) {
        for (w, peak) in self.windows.iter().zip(&mut self.peaks) {
            if tn >= w.start && tn < w.end {
                for (p, r) in peak.iter_mut().zip(reference) {
                    *p = p.max(r.abs());
                }
            }
        }
    }

    pub fn finish(&self) -> Result<Vec<AxisCoupling>> {
        self.windows
            .iter()
            .zip(&self.peaks)
            .map(|(w, peak)| {
                let on_peak = peak[w.axis.index()];
                if on_peak <= 0.0 {
                    return Err(Error::InvalidScenario("commanded axis produced no reference"));
                }
                let others = w.axis.others();
                let mut off_peaks = [0.0; 5];
                for (o, a) in off_peaks.iter_mut().zip(others) {
                    *o = peak[a.index()];
                }
                let max_off = off_peaks.iter().fold(0.0f64, |m, x| m.max(*x));
                Ok(AxisCoupling {
                    axis: w.axis,
                    on_peak,
                    off_peaks,
                    ratio: max_off / on_peak,
                })
            })
            .collect()
    }
}

/// Result of one repetition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepetitionCoupling {
    pub repetition: usize,
    pub axes: Vec<AxisCoupling>,
}

/// Runs repetition `repetition` of `trial`. The tremor stream is derived from
/// the simulation seed and the repetition index.
pub fn run_decoupling_repetition(
    params: &SimParams,
    trial: &DecouplingTrial,
    repetition: usize,
    sink: impl FnMut(&StepRecord),
) -> Result<RepetitionCoupling> {
    trial.validate()?;
    if params.wall.is_some() {
        return Err(Error::InvalidScenario("decoupling trials run in free flight"));
    }
    let mut operator = ScriptedOperator::new(trial.phases(params)?, Some(trial.grip), params.dt)?;
    if trial.tremor > 0.0 {
        operator = operator.with_tremor(Tremor::new(
            trial.tremor,
            trial.tremor_lever,
            trial.tremor_tau,
            params.dt,
            params.seed,
            16 + repetition as u64,
        ));
    }
    let mut world = World::new(params.clone(), InitialState::default())?;
    let mut meter = CouplingMeter::new(&trial.schedule);
    let mut sink = sink;
    world.run(&mut operator, params.ticks(trial.duration), |r| {
        meter.observe(r.t / trial.duration, &r.command());
        sink(r);
    })?;
    Ok(RepetitionCoupling {
        repetition,
        axes: meter.finish()?,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Shifted by the first sample, so identical samples give exactly zero spread.
    pub fn of(xs: &[f64]) -> Self {
        let Some(&x0) = xs.first() else {
            return Self::default();
        };
        let n = xs.len() as f64;
        let s1: f64 = xs.iter().map(|x| x - x0).sum();
        let s2: f64 = xs.iter().map(|x| (x - x0) * (x - x0)).sum();
        let var = if xs.len() > 1 {
            ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean: x0 + s1 / n,
            std: libm::sqrt(var),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisStats {
    pub axis: Axis,
    pub on_peak: Stat,
    pub off_peaks: [Stat; 5],
    pub ratio: Stat,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingReport {
    pub repetitions: Vec<RepetitionCoupling>,
    pub axes: Vec<AxisStats>,
}

impl CouplingReport {
    /// Aggregates repetitions in index order, whatever order they arrive in.
    pub fn aggregate(mut repetitions: Vec<RepetitionCoupling>) -> Result<Self> {
        repetitions.sort_by_key(|r| r.repetition);
        let first = repetitions.first().ok_or(Error::InvalidScenario("no repetitions"))?;
        let n_axes = first.axes.len();
        ensure(
            repetitions.iter().all(|r| r.axes.len() == n_axes),
            "trial.schedule",
            "repetitions disagree on the schedule",
        )?;
        let axes = (0..n_axes)
            .map(|k| {
                let col = |f: &dyn Fn(&AxisCoupling) -> f64| -> Vec<f64> {
                    repetitions.iter().map(|r| f(&r.axes[k])).collect()
                };
                let mut off_peaks = [Stat::default(); 5];
                for (j, s) in off_peaks.iter_mut().enumerate() {
                    *s = Stat::of(&col(&|a| a.off_peaks[j]));
                }
                let ratios = col(&|a| a.ratio);
                AxisStats {
                    axis: first.axes[k].axis,
                    on_peak: Stat::of(&col(&|a| a.on_peak)),
                    off_peaks,
                    ratio: Stat::of(&ratios),
                    ratio_max: ratios.iter().fold(0.0f64, |m, x| m.max(*x)),
                }
            })
            .collect();
        Ok(Self { repetitions, axes })
    }

    /// Largest mean coupling ratio over all axes.
    pub fn max_ratio(&self) -> f64 {
        self.axes.iter().fold(0.0f64, |m, a| m.max(a.ratio.mean))
    }
}

/// Runs every repetition sequentially and aggregates.
pub fn run_decoupling(
    params: &SimParams,
    trial: &DecouplingTrial,
    mut sink: impl FnMut(usize, &StepRecord),
) -> Result<CouplingReport> {
    let reps = (0..trial.repetitions)
        .map(|rep| run_decoupling_repetition(params, trial, rep, |r| sink(rep, r)))
        .collect::<Result<Vec<_>>>()?;
    CouplingReport::aggregate(reps)
}

/// `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    fn trimmed(&self, settle: f64) -> Self {
        Self::new(self.start + settle, self.end)
    }
}

/// Approach along the tool axis, push, slide up, slide down. Displacement
/// targets are handle offsets in the idle frame; the tool axis is handle x
/// and the slide axis handle z.
#[derive(Debug, Clone, PartialEq)]
pub struct PushSlideScript {
    pub duration: f64,
    pub approach: Window,
    pub approach_target: f64,
    pub push: Window,
    pub slide_up: Window,
    pub slide_down: Window,
    pub slide_target: f64,
    /// Time skipped at the start of each analysis window [s].
    pub settle: f64,
    pub grip: Grip,
}

impl Default for PushSlideScript {
    fn default() -> Self {
        Self {
            duration: 13.0,
            approach: Window::new(0.5, 3.5),
            approach_target: 0.1,
            push: Window::new(3.5, 6.0),
            slide_up: Window::new(6.0, 9.0),
            slide_down: Window::new(9.5, 12.5),
            slide_target: 0.1,
            settle: 1.5,
            grip: Grip::default(),
        }
    }
}

impl PushSlideScript {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.approach, self.push, self.slide_up, self.slide_down];
        for (i, w) in ws.iter().enumerate() {
            ensure(w.start < w.end, "script", "phase windows need start < end")?;
            ensure(
                w.end - w.start > self.settle,
                "script.settle",
                "must be shorter than every phase",
            )?;
            if i > 0 {
                ensure(
                    ws[i - 1].end <= w.start,
                    "script",
                    "phases must be ordered and disjoint",
                )?;
            }
        }
        ensure(
            self.slide_down.end <= self.duration,
            "script.duration",
            "must cover all phases",
        )?;
        ensure(self.settle >= 0.0, "script.settle", "must be non-negative")
    }

    pub fn phases(&self) -> Vec<Phase> {
        let phase = |w: Window, x: f64, z: f64| {
            let mut target = [Some(0.0); 6];
            target[0] = Some(x);
            target[2] = Some(z);
            Phase {
                start: w.start,
                end: w.end,
                feedforward: [0.0; 6],
                target,
            }
        };
        alloc::vec![
            phase(self.approach, self.approach_target, 0.0),
            phase(self.push, 0.0, 0.0),
            phase(self.slide_up, 0.0, self.slide_target),
            phase(self.slide_down, 0.0, -self.slide_target),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PushSlideReport {
    pub contact_onset: f64,
    /// Feedback force magnitude over the settled push window [N].
    pub push_force: Stat,
    /// Mean feedback force in the idle frame over the push window [N].
    pub push_feedback: [f64; 3],
    /// Series-spring prediction from the reference tool-tip penetration [N].
    pub predicted_force: f64,
    /// Mean interaction torque about body y while sliding [N·m].
    pub up_torque: f64,
    pub down_torque: f64,
    /// Mean wall-normal force while sliding [N].
    pub up_normal: f64,
    pub down_normal: f64,
    /// `(t, α)`: angle between the tool axis and the inward wall normal [rad].
    pub alpha: Vec<(f64, f64)>,
}

impl PushSlideReport {
    /// Push opposes the approach, upward slide gives positive torque about
    /// body y, downward slide negative.
    pub fn signature_holds(&self) -> bool {
        self.push_feedback[0] < 0.0 && self.up_torque > 0.0 && self.down_torque < 0.0
    }

    /// Relative deviation of the measured push force from the prediction.
    pub fn push_error(&self) -> f64 {
        (self.push_force.mean - self.predicted_force).abs() / self.predicted_force
    }
}

fn quat(q: &[f64; 4]) -> Rotation {
    Rotation::try_from_wxyz(q[0], q[1], q[2], q[3]).unwrap_or_default()
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Incremental evaluation of the push-and-slide windows.
struct PushSlideMeter<'a> {
    script: &'a PushSlideScript,
    wall: WallModel,
    tool: Vec3,
    series: f64,
    onset: Option<f64>,
    push: Vec<f64>,
    push_vec: [Mean; 3],
    predicted: Mean,
    up: Mean,
    down: Mean,
    up_normal: Mean,
    down_normal: Mean,
    alpha: Vec<(f64, f64)>,
}

impl<'a> PushSlideMeter<'a> {
    fn new(script: &'a PushSlideScript, params: &SimParams, wall: WallModel) -> Self {
        let k = params.vehicle.stiffness.0[0];
        Self {
            script,
            wall,
            tool: params.vehicle.tool_offset,
            series: k * wall.stiffness / (k + wall.stiffness),
            onset: None,
            push: Vec::new(),
            push_vec: Default::default(),
            predicted: Mean::default(),
            up: Mean::default(),
            down: Mean::default(),
            up_normal: Mean::default(),
            down_normal: Mean::default(),
            alpha: Vec::new(),
        }
    }

    fn observe(&mut self, r: &StepRecord) {
        // Contact quantities are evaluated at the start of the tick.
        let t = r.t;
        let q_s = quat(&r.q_s);
        if self.onset.is_none() && r.in_contact() {
            self.onset = Some(t);
        }
        let axis = q_s.rotate(&self.tool.normalize());
        let cos = (-axis.dot(&self.wall.normal)).clamp(-1.0, 1.0);
        self.alpha.push((t, libm::acos(cos)));

        let s = self.script;
        let force = v3(&[r.w_int[0], r.w_int[1], r.w_int[2]]);
        if s.push.trimmed(s.settle).contains(t) {
            self.push.push(force.norm());
            for (m, f) in self.push_vec.iter_mut().zip(force.iter()) {
                m.push(*f);
            }
            let tip = v3(&r.p_ref) + quat(&r.q_ref).rotate(&self.tool);
            self.predicted.push(self.series * self.wall.penetration(&tip));
        }
        let normal = q_s.rotate(&v3(&r.f_k)).dot(&self.wall.normal);
        if s.slide_up.trimmed(s.settle).contains(t) {
            self.up.push(r.w_int[4]);
            self.up_normal.push(normal);
        }
        if s.slide_down.trimmed(s.settle).contains(t) {
            self.down.push(r.w_int[4]);
            self.down_normal.push(normal);
        }
    }

    fn finish(self) -> Result<PushSlideReport> {
        let contact_onset = self.onset.ok_or(Error::NoContact)?;
        Ok(PushSlideReport {
            contact_onset,
            push_force: Stat::of(&self.push),
            push_feedback: [self.push_vec[0].get(), self.push_vec[1].get(), self.push_vec[2].get()],
            predicted_force: self.predicted.get(),
            up_torque: self.up.get(),
            down_torque: self.down.get(),
            up_normal: self.up_normal.get(),
            down_normal: self.down_normal.get(),
            alpha: self.alpha,
        })
    }
}

/// Runs the push-and-slide script against the configured wall.
pub fn run_push_slide(
    params: &SimParams,
    initial: InitialState,
    script: &PushSlideScript,
    mut sink: impl FnMut(&StepRecord),
) -> Result<PushSlideReport> {
    script.validate()?;
    let wall = params
        .wall
        .ok_or(Error::InvalidScenario("push-and-slide needs a wall"))?;
    let mut operator = ScriptedOperator::new(script.phases(), Some(script.grip), params.dt)?;
    let mut world = World::new(params.clone(), initial)?;
    let mut meter = PushSlideMeter::new(script, params, wall);
    world.run(&mut operator, params.ticks(script.duration), |r| {
        meter.observe(r);
        sink(r);
    })?;
    meter.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Diag6;
    use crate::vehicle::{critical_damping, VehicleState};
    use alloc::vec;

    fn free_params() -> SimParams {
        SimParams::default()
    }

    fn short_trial() -> DecouplingTrial {
        DecouplingTrial {
            duration: 20.0,
            repetitions: 2,
            ..DecouplingTrial::default()
        }
    }

    #[test]
    fn noise_free_trial_is_exactly_decoupled() {
        let report = run_decoupling(&free_params(), &short_trial(), |_, _| {}).unwrap();
        for a in &report.axes {
            assert_eq!(a.ratio.mean, 0.0, "{}", a.axis);
            assert_eq!(a.on_peak.std, 0.0);
            assert!(a.on_peak.mean > 0.0);
        }
        let tx = &report.axes[0];
        assert!((tx.on_peak.mean - 0.1).abs() < 0.01, "{}", tx.on_peak.mean);
        let rx = &report.axes[3];
        assert!((rx.on_peak.mean - 0.25).abs() < 0.03, "{}", rx.on_peak.mean);
    }

    #[test]
    fn tremor_coupling_grows_with_amplitude() {
        let run = |amp| {
            let trial = DecouplingTrial {
                tremor: amp,
                repetitions: 1,
                ..short_trial()
            };
            run_decoupling(&free_params(), &trial, |_, _| {}).unwrap()
        };
        let (a, b) = (run(4.0), run(8.0));
        assert_eq!(a, run(4.0));
        for (x, y) in a.axes.iter().zip(&b.axes) {
            assert!(x.ratio.mean > 0.0);
            assert!(
                y.ratio.mean >= x.ratio.mean,
                "{}: {} vs {}",
                x.axis,
                x.ratio.mean,
                y.ratio.mean
            );
        }
    }

    #[test]
    fn wall_is_rejected_for_decoupling() {
        let mut p = free_params();
        p.wall = Some(whiteboard(0.4));
        assert!(matches!(
            run_decoupling_repetition(&p, &short_trial(), 0, |_| {}),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn meter_ignores_time_scale() {
        let windows = [
            AxisWindow {
                axis: Axis::Tx,
                start: 0.0,
                end: 0.5,
            },
            AxisWindow {
                axis: Axis::Rz,
                start: 0.5,
                end: 1.0,
            },
        ];
        let signal = |tn: f64| {
            let s = libm::sin(7.0 * tn);
            [s, 0.1 * s * s, 0.0, 0.0, 0.02 * tn, 1.0 - tn]
        };
        let ratios = |duration: f64| {
            let mut m = CouplingMeter::new(&windows);
            for k in 0..1000 {
                let t = k as f64 * duration / 1000.0;
                m.observe(t / duration, &signal(t / duration));
            }
            m.finish().unwrap()
        };
        assert_eq!(ratios(10.0), ratios(37.0));
    }

    #[test]
    fn meter_needs_on_axis_motion() {
        let mut m = CouplingMeter::new(&[AxisWindow {
            axis: Axis::Ty,
            start: 0.0,
            end: 1.0,
        }]);
        m.observe(0.5, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(m.finish().is_err());
    }

    #[test]
    fn aggregate_sorts_repetitions() {
        let rep = |i, r| RepetitionCoupling {
            repetition: i,
            axes: vec![AxisCoupling {
                axis: Axis::Tx,
                on_peak: 1.0,
                off_peaks: [r, 0.0, 0.0, 0.0, 0.0],
                ratio: r,
            }],
        };
        let a = CouplingReport::aggregate(vec![rep(1, 0.2), rep(0, 0.1), rep(2, 0.3)]).unwrap();
        let b = CouplingReport::aggregate(vec![rep(0, 0.1), rep(1, 0.2), rep(2, 0.3)]).unwrap();
        assert_eq!(a, b);
        assert!((a.axes[0].ratio.mean - 0.2).abs() < 1e-15);
        assert!((a.axes[0].ratio.std - 0.1).abs() < 1e-15);
        assert_eq!(a.axes[0].ratio_max, 0.3);
    }

    #[test]
    fn stat_of_identical_values() {
        let s = Stat::of(&[0.1 + 0.2; 5]);
        assert_eq!(
            s,
            Stat {
                mean: 0.1 + 0.2,
                std: 0.0
            }
        );
        assert_eq!(Stat::of(&[]), Stat::default());
    }

    fn whiteboard(mu: f64) -> WallModel {
        WallModel {
            point: Vec3::new(0.0, -0.58, 0.0),
            normal: Vec3::y(),
            stiffness: 1000.0,
            damping: 20.0,
            friction: mu,
            stiction_velocity: 0.02,
        }
    }

    fn push_slide(mu: f64) -> (SimParams, InitialState) {
        let mut p = SimParams {
            wall: Some(whiteboard(mu)),
            ..SimParams::default()
        };
        p.station.human_inertia = Diag6::from_blocks(2.0, 0.0);
        p.station.human_damping = Diag6::from_blocks(40.0, 0.0);
        p.vehicle.stiffness = Diag6::from_blocks(100.0, 60.0);
        p.vehicle.damping = critical_damping(&p.vehicle.inertia, &p.vehicle.stiffness, 1.0);
        let initial = InitialState {
            vehicle: VehicleState::at(
                Vec3::new(0.0, 0.2, 1.0),
                Rotation::from_axis_angle(&Vec3::z(), -core::f64::consts::FRAC_PI_2),
            ),
            ..InitialState::default()
        };
        (p, initial)
    }

    #[test]
    fn push_slide_signature() {
        let (p, init) = push_slide(0.4);
        let r = run_push_slide(&p, init, &PushSlideScript::default(), |_| {}).unwrap();
        assert!(r.signature_holds(), "{r:?}");
        assert!(
            r.push_error() < 0.05,
            "push {:?} predicted {}",
            r.push_force,
            r.predicted_force
        );
        for (torque, normal) in [(r.up_torque, r.up_normal), (r.down_torque, r.down_normal)] {
            let estimate = 0.4 * normal * 0.6;
            assert!(
                (torque.abs() - estimate).abs() < 0.2 * estimate,
                "{torque} vs {estimate}"
            );
        }
    }

    #[test]
    fn frictionless_slide_has_no_torque() {
        let (p, init) = push_slide(0.0);
        let r = run_push_slide(&p, init, &PushSlideScript::default(), |_| {}).unwrap();
        assert!(r.up_torque.abs() < 0.05 && r.down_torque.abs() < 0.05, "{r:?}");
    }

    #[test]
    fn distant_wall_is_never_reached() {
        let (mut p, init) = push_slide(0.4);
        p.wall = Some(WallModel {
            point: Vec3::new(0.0, -10.0, 0.0),
            ..whiteboard(0.4)
        });
        let script = PushSlideScript {
            duration: 8.0,
            approach: Window::new(0.0, 2.0),
            push: Window::new(2.0, 3.5),
            slide_up: Window::new(3.5, 5.0),
            slide_down: Window::new(5.0, 7.0),
            settle: 0.5,
            ..PushSlideScript::default()
        };
        assert!(matches!(
            run_push_slide(&p, init, &script, |_| {}),
            Err(Error::NoContact)
        ));
    }
}
