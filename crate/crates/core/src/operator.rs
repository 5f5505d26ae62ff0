//! Operator models that produce one [`OperatorInput`] per tick.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Result};
use crate::geom::{Frame, Wrench};
use crate::station::{OperatorCommand, StationState};
use crate::world::OperatorInput;

/// Something that drives the handle.
pub trait Operator {
    /// Input for the tick starting at time `t`, given the handle state at
    /// that instant.
    fn input(&mut self, tick: u64, t: f64, handle: &StationState) -> OperatorInput;
}

impl<O: Operator + ?Sized> Operator for &mut O {
    fn input(&mut self, tick: u64, t: f64, handle: &StationState) -> OperatorInput {
        (**self).input(tick, t, handle)
    }
}

/// Never touches the handle.
#[derive(Debug, Clone, Copy, Default)]
pub struct Idle;

impl Operator for Idle {
    fn input(&mut self, _: u64, t: f64, _: &StationState) -> OperatorInput {
        OperatorInput::Wrench(OperatorCommand::idle(t))
    }
}

/// Time-stamped active wrench samples `(t, [f; τ])` in the handle frame,
/// zero-order held between samples. Zero before the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchTrace {
    samples: Vec<(f64, [f64; 6])>,
    cursor: usize,
}

impl WrenchTrace {
    pub fn new(samples: Vec<(f64, [f64; 6])>) -> Result<Self> {
        for (i, (t, w)) in samples.iter().enumerate() {
            ensure(
                t.is_finite() && w.iter().all(|x| x.is_finite()),
                "trace",
                "samples must be finite",
            )?;
            if i > 0 {
                ensure(*t >= samples[i - 1].0, "trace", "timestamps must be nondecreasing")?;
            }
        }
        Ok(Self { samples, cursor: 0 })
    }

    pub fn samples(&self) -> &[(f64, [f64; 6])] {
        &self.samples
    }

    /// Held sample at `t`. Queries must be nondecreasing in time.
    pub fn at(&mut self, t: f64) -> [f64; 6] {
        // Tolerates timestamps written with fewer digits than the tick time.
        let t = t + 1e-9;
        while self.cursor < self.samples.len() && self.samples[self.cursor].0 <= t {
            self.cursor += 1;
        }
        match self.cursor {
            0 => [0.0; 6],
            n => self.samples[n - 1].1,
        }
    }
}

impl Operator for WrenchTrace {
    fn input(&mut self, _: u64, t: f64, _: &StationState) -> OperatorInput {
        OperatorInput::Wrench(OperatorCommand::from_array(self.at(t), t))
    }
}

/// Inputs keyed by tick, each held until the next one. Idle before the first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Replay {
    events: Vec<(u64, OperatorInput)>,
    cursor: usize,
    held: Option<OperatorInput>,
}

impl Replay {
    pub fn new(mut events: Vec<(u64, OperatorInput)>) -> Self {
        events.sort_by_key(|(tick, _)| *tick);
        Self {
            events,
            cursor: 0,
            held: None,
        }
    }
}

impl Operator for Replay {
    fn input(&mut self, tick: u64, t: f64, _: &StationState) -> OperatorInput {
        while self.cursor < self.events.len() && self.events[self.cursor].0 <= tick {
            self.held = Some(self.events[self.cursor].1);
            self.cursor += 1;
        }
        self.held.unwrap_or(OperatorInput::Wrench(OperatorCommand::idle(t)))
    }
}

/// Ornstein-Uhlenbeck hand tremor, one independent channel per axis.
///
/// The unit-variance sequence depends only on the seed and stream; the
/// amplitude scales it, so the same seed at two amplitudes yields two
/// proportional wrench sequences.
#[derive(Debug, Clone)]
pub struct Tremor {
    amplitude: f64,
    torque_per_force: f64,
    decay: f64,
    gain: f64,
    state: [f64; 6],
    rng: ChaCha8Rng,
}

impl Tremor {
    /// `amplitude` is the force standard deviation [N]; torques use
    /// `amplitude · torque_per_force` [N·m]. `tau` is the correlation time [s].
    pub fn new(amplitude: f64, torque_per_force: f64, tau: f64, dt: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut state = [0.0; 6];
        for s in &mut state {
            *s = StandardNormal.sample(&mut rng);
        }
        let decay = libm::exp(-dt / tau);
        Self {
            amplitude,
            torque_per_force,
            decay,
            gain: libm::sqrt(1.0 - decay * decay),
            state,
            rng,
        }
    }

    /// Tremor wrench for the current tick, then advances the process.
    pub fn sample(&mut self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (i, s) in self.state.iter_mut().enumerate() {
            let scale = if i < 3 {
                self.amplitude
            } else {
                self.amplitude * self.torque_per_force
            };
            out[i] = scale * *s;
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *s = self.decay * *s + self.gain * z;
        }
        out
    }
}

/// PID hold of the handle displacement, the way a hand keeps a grip steady.
///
/// The proportional term acts on `weight · target − displacement`, so a
/// target step does not overshoot; the integral removes the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grip {
    pub kp_t: f64,
    pub kd_t: f64,
    pub ki_t: f64,
    pub kp_r: f64,
    pub kd_r: f64,
    pub ki_r: f64,
    pub weight: f64,
}

impl Default for Grip {
    /// Triple closed-loop pole at −10 rad/s on the default device.
    fn default() -> Self {
        Self {
            kp_t: 2950.0,
            kd_t: 295.0,
            ki_t: 10000.0,
            kp_r: 298.0,
            kd_r: 29.0,
            ki_r: 1000.0,
            weight: 0.5,
        }
    }
}

impl Grip {
    fn gains(&self, axis: usize) -> (f64, f64, f64) {
        if axis < 3 {
            (self.kp_t, self.kd_t, self.ki_t)
        } else {
            (self.kp_r, self.kd_r, self.ki_r)
        }
    }
}

/// A time interval with a feedforward wrench and per-axis displacement
/// targets, both in the idle frame. `None` leaves the axis to the feedforward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    pub feedforward: [f64; 6],
    pub target: [Option<f64>; 6],
}

impl Phase {
    /// Holds every axis at the center except `axis`, which is held at `target`
    /// with `feedforward` pushing toward it.
    pub fn single_axis(start: f64, end: f64, axis: usize, feedforward: f64, target: f64) -> Self {
        let mut ff = [0.0; 6];
        let mut tg = [Some(0.0); 6];
        ff[axis] = feedforward;
        tg[axis] = Some(target);
        Self {
            start,
            end,
            feedforward: ff,
            target: tg,
        }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Scripted hand: phase feedforward plus a grip, plus optional tremor.
/// Between phases the grip holds the handle at the center. The grip integral
/// carries over phase boundaries.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    phases: Vec<Phase>,
    grip: Option<Grip>,
    tremor: Option<Tremor>,
    dt: f64,
    integral: [f64; 6],
}

impl ScriptedOperator {
    pub fn new(phases: Vec<Phase>, grip: Option<Grip>, dt: f64) -> Result<Self> {
        for (i, p) in phases.iter().enumerate() {
            ensure(
                p.start.is_finite() && p.end.is_finite() && p.start < p.end,
                "script.phases",
                "each phase needs start < end",
            )?;
            if i > 0 {
                ensure(
                    phases[i - 1].end <= p.start,
                    "script.phases",
                    "phases must be ordered and disjoint",
                )?;
            }
        }
        Ok(Self {
            phases,
            grip,
            tremor: None,
            dt,
            integral: [0.0; 6],
        })
    }

    pub fn with_tremor(mut self, tremor: Tremor) -> Self {
        self.tremor = Some(tremor);
        self
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }
}

impl Operator for ScriptedOperator {
    fn input(&mut self, _: u64, t: f64, handle: &StationState) -> OperatorInput {
        let (feedforward, target) = match self.phases.iter().position(|p| p.contains(t)) {
            Some(i) => (self.phases[i].feedforward, self.phases[i].target),
            None => ([0.0; 6], [Some(0.0); 6]),
        };

        let r = handle.pose.orientation;
        let disp = handle.displacement();
        let v = r.rotate(&handle.twist.linear);
        let w = r.rotate(&handle.twist.angular);
        let rate = [v.x, v.y, v.z, w.x, w.y, w.z];

        let mut idle = feedforward;
        if let Some(grip) = &self.grip {
            for i in 0..6 {
                if let Some(x) = target[i] {
                    let (kp, kd, ki) = grip.gains(i);
                    self.integral[i] += (x - disp[i]) * self.dt;
                    idle[i] += kp * (grip.weight * x - disp[i]) - kd * rate[i] + ki * self.integral[i];
                }
            }
        }

        let mut wrench = Wrench::from_array(idle, Frame::Idle)
            .rotated(&r, true, Frame::Handle)
            .to_array();
        if let Some(tremor) = &mut self.tremor {
            let noise = tremor.sample();
            if tremor.amplitude != 0.0 {
                for (w, n) in wrench.iter_mut().zip(noise) {
                    *w += n;
                }
            }
        }
        OperatorInput::Wrench(OperatorCommand::from_array(wrench, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose, Rotation, Vec3};
    use alloc::vec;

    fn wrench(input: OperatorInput) -> [f64; 6] {
        match input {
            OperatorInput::Wrench(c) => c.wrench.to_array(),
            OperatorInput::Pose(_) => panic!("expected wrench input"),
        }
    }

    #[test]
    fn trace_holds_between_samples() {
        let mut tr = WrenchTrace::new(vec![
            (0.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (0.5, [2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(tr.at(0.0)[0], 1.0);
        assert_eq!(tr.at(0.499)[0], 1.0);
        assert_eq!(tr.at(0.5)[0], 2.0);
        assert_eq!(tr.at(10.0)[0], 2.0);
    }

    #[test]
    fn trace_before_first_sample_is_zero() {
        let mut tr = WrenchTrace::new(vec![(1.0, [3.0; 6])]).unwrap();
        assert_eq!(tr.at(0.2), [0.0; 6]);
        assert_eq!(tr.at(1.0), [3.0; 6]);
    }

    #[test]
    fn trace_rejects_unordered() {
        assert!(WrenchTrace::new(vec![(1.0, [0.0; 6]), (0.5, [0.0; 6])]).is_err());
        assert!(WrenchTrace::new(vec![(f64::NAN, [0.0; 6])]).is_err());
    }

    #[test]
    fn replay_holds_last_event() {
        let pose = OperatorInput::Pose(Pose::new(Vec3::new(0.1, 0.0, 0.0), Rotation::identity()));
        let mut r = Replay::new(vec![(5, pose)]);
        let h = StationState::default();
        assert_eq!(r.input(0, 0.0, &h), OperatorInput::Wrench(OperatorCommand::idle(0.0)));
        assert_eq!(r.input(5, 0.005, &h), pose);
        assert_eq!(r.input(900, 0.9, &h), pose);
    }

    #[test]
    fn tremor_scales_linearly() {
        let mut a = Tremor::new(1.0, 0.1, 0.1, 1e-3, 9, 0);
        let mut b = Tremor::new(3.0, 0.1, 0.1, 1e-3, 9, 0);
        for _ in 0..100 {
            let (x, y) = (a.sample(), b.sample());
            for i in 0..6 {
                assert!((3.0 * x[i] - y[i]).abs() <= 1e-12 * y[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn tremor_has_unit_scale() {
        let mut t = Tremor::new(1.0, 0.1, 0.02, 1e-3, 3, 1);
        let n = 200_000;
        let var = (0..n).map(|_| t.sample()[0].powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn grip_keeps_exact_zeros_off_axis() {
        let mut op = ScriptedOperator::new(
            vec![Phase::single_axis(0.0, 1.0, 1, 5.0, 0.1)],
            Some(Grip::default()),
            1e-3,
        )
        .unwrap();
        let h = StationState::at_pose(Pose::new(Vec3::new(0.0, 0.03, 0.0), Rotation::identity()));
        let w = wrench(op.input(0, 0.0, &h));
        assert_eq!([w[0], w[2], w[3], w[4], w[5]], [0.0; 5]);
        assert!(w[1] > 5.0);
    }

    #[test]
    fn grip_is_expressed_in_handle_frame() {
        let mut op = ScriptedOperator::new(
            vec![Phase {
                start: 0.0,
                end: 1.0,
                feedforward: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                target: [None; 6],
            }],
            Some(Grip::default()),
            1e-3,
        )
        .unwrap();
        let r = Rotation::from_axis_angle(&Vec3::z(), core::f64::consts::FRAC_PI_2);
        let h = StationState::at_pose(Pose::new(Vec3::zeros(), r));
        let w = wrench(op.input(0, 0.0, &h));
        // Idle x is handle −y after a quarter turn about z.
        assert!((w[0]).abs() < 1e-12 && (w[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn phases_must_be_disjoint() {
        let p = |a, b| Phase::single_axis(a, b, 0, 1.0, 0.0);
        assert!(ScriptedOperator::new(vec![p(0.0, 1.0), p(0.5, 2.0)], None, 1e-3).is_err());
        assert!(ScriptedOperator::new(vec![p(1.0, 1.0)], None, 1e-3).is_err());
        assert!(ScriptedOperator::new(vec![p(0.0, 1.0), p(1.0, 2.0)], None, 1e-3).is_ok());
    }
}
