//! Closed bilateral loop: station → reference generation → link → vehicle →
//! feedback generation → link → station, advanced one fixed tick at a time.

use crate::contact::{contact_wrench, WallModel};
use crate::error::{ensure, Error, Result};
use crate::geom::{to_array, Frame, Pose, Vec3, Wrench};
use crate::link::{Link, LinkModel};
use crate::operator::Operator;
use crate::policy::{
    integrate_references, interaction_feedback, interaction_wrench, recentering_wrench, reference_twist,
    total_feedback, ContactMeasurement, PolicyParams, ReferenceState,
};
use crate::station::{internal_wrench, station_step, OperatorCommand, StationLimits, StationParams, StationState};
use crate::vehicle::{impedance_step, tool_tip_state, VehicleParams, VehicleState};

/// Everything needed to step the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    pub station: StationParams,
    pub limits: StationLimits,
    pub policy: PolicyParams,
    pub vehicle: VehicleParams,
    pub wall: Option<WallModel>,
    pub link: LinkModel,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            station: StationParams::default(),
            limits: StationLimits::default(),
            policy: PolicyParams::default(),
            vehicle: VehicleParams::default(),
            wall: None,
            link: LinkModel::default(),
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt <= 0.01, "sim.dt", "must lie in (0, 0.01] s")?;
        self.station.validate()?;
        self.limits.validate()?;
        self.policy.validate()?;
        self.vehicle.validate()?;
        if let Some(wall) = &self.wall {
            wall.validate()?;
        }
        self.link.validate()
    }

    /// Number of ticks covering `duration` seconds.
    pub fn ticks(&self, duration: f64) -> u64 {
        libm::round(duration / self.dt) as u64
    }
}

/// Starting point of a run. The reference starts on the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialState {
    pub station: StationState,
    pub vehicle: VehicleState,
}

/// What the operator does during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorInput {
    /// Active wrench through the admittance-rendered handle.
    Wrench(OperatorCommand),
    /// Handle pose imposed directly, bypassing the device dynamics.
    Pose(Pose),
}

impl OperatorInput {
    pub fn idle() -> Self {
        OperatorInput::Wrench(OperatorCommand::idle(0.0))
    }
}

/// One tick of telemetry. Frames: handle quantities in the idle/handle
/// frames, `*_cmd` and contact quantities in the body frame, references and
/// vehicle position/velocity in the world frame, feedback in the idle frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub tick: u64,
    pub t: f64,
    pub handle_p: [f64; 3],
    pub handle_q: [f64; 4],
    pub handle_v: [f64; 3],
    pub handle_w: [f64; 3],
    pub f_a: [f64; 6],
    pub v_cmd: [f64; 3],
    pub w_cmd: [f64; 3],
    pub p_ref: [f64; 3],
    pub v_ref: [f64; 3],
    pub q_ref: [f64; 4],
    pub w_ref: [f64; 3],
    pub p_s: [f64; 3],
    pub v_s: [f64; 3],
    pub q_s: [f64; 4],
    pub w_s: [f64; 3],
    pub f_k: [f64; 3],
    pub tau_k: [f64; 3],
    pub w_rec: [f64; 6],
    pub w_int: [f64; 6],
    pub w_fb: [f64; 6],
    pub f_h: [f64; 6],
}

impl StepRecord {
    /// Commanded body-frame twist `[v; ω]` as produced by the policy.
    pub fn command(&self) -> [f64; 6] {
        let (v, w) = (self.v_cmd, self.w_cmd);
        [v[0], v[1], v[2], w[0], w[1], w[2]]
    }

    pub fn in_contact(&self) -> bool {
        self.f_k.iter().any(|&f| f != 0.0)
    }

    pub fn contact_force(&self) -> f64 {
        let [x, y, z] = self.f_k;
        libm::sqrt(x * x + y * y + z * z)
    }
}

/// The simulated world. Owns all mutable state of both sites and the link.
#[derive(Debug, Clone)]
pub struct World {
    params: SimParams,
    tick: u64,
    station: StationState,
    reference: ReferenceState,
    vehicle: VehicleState,
    forward: Link<(Vec3, Vec3)>,
    back: Link<Wrench>,
}

impl World {
    pub fn new(params: SimParams, initial: InitialState) -> Result<Self> {
        params.validate()?;
        let forward = Link::new(
            params.link.forward_delay,
            params.link.jitter,
            params.dt,
            params.seed,
            1,
            (Vec3::zeros(), Vec3::zeros()),
        );
        let back = Link::new(
            params.link.return_delay,
            params.link.jitter,
            params.dt,
            params.seed,
            2,
            Wrench::zero(Frame::Idle),
        );
        Ok(Self {
            tick: 0,
            station: initial.station,
            reference: initial.vehicle.as_reference(),
            vehicle: initial.vehicle,
            forward,
            back,
            params,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Simulation time at the start of the next tick.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.params.dt
    }

    pub fn station(&self) -> &StationState {
        &self.station
    }

    pub fn reference(&self) -> &ReferenceState {
        &self.reference
    }

    pub fn vehicle(&self) -> &VehicleState {
        &self.vehicle
    }

    /// Steps `ticks` times with inputs from `operator`, handing every record to `sink`.
    pub fn run<O: Operator + ?Sized>(
        &mut self,
        operator: &mut O,
        ticks: u64,
        mut sink: impl FnMut(&StepRecord),
    ) -> Result<()> {
        for _ in 0..ticks {
            let input = operator.input(self.tick, self.time(), &self.station);
            let record = self.step(&input)?;
            sink(&record);
        }
        Ok(())
    }

    /// Executes one tick in the fixed order of the loop and returns its record.
    ///
    /// The feedback applied to the station is the one computed on an earlier
    /// tick, so the loop always carries at least one tick of latency.
    pub fn step(&mut self, input: &OperatorInput) -> Result<StepRecord> {
        let tick = self.tick;
        self.step_inner(input).map_err(|e| match e {
            Error::NonFiniteState { what } => Error::Diverged { tick, what },
            other => other,
        })
    }

    fn step_inner(&mut self, input: &OperatorInput) -> Result<StepRecord> {
        let p = &self.params;
        let dt = p.dt;
        let tick = self.tick;

        // 1. station, driven by the delayed feedback
        let feedback = *self.back.receive(tick);
        let (station, accel, f_a) = match input {
            OperatorInput::Wrench(cmd) => {
                let cmd = cmd.clamped(&p.limits);
                let out = station_step(&self.station, &cmd, &feedback, &p.station, &p.limits, dt)?;
                (out.state, out.accel, cmd.wrench.to_array())
            }
            OperatorInput::Pose(pose) => (StationState::at_pose(*pose), [0.0; 6], [0.0; 6]),
        };

        // 2.–4. reference generation, forward link, integration
        let (v_cmd, w_cmd) = reference_twist(&station, &p.policy);
        let (v_remote, w_remote) = self.forward.transmit(tick, (v_cmd, w_cmd));
        let reference = integrate_references(&self.reference, &v_remote, &w_remote, dt);

        // 5. contact at the current tool tip
        let contact = match &p.wall {
            Some(wall) => {
                let (tip_p, tip_v) = tool_tip_state(&self.vehicle, &p.vehicle.tool_offset);
                contact_wrench(&tip_p, &tip_v, wall, &self.vehicle)
            }
            None => ContactMeasurement::default(),
        };

        // 6. vehicle
        let w_ext = interaction_wrench(&contact, &p.vehicle.tool_offset, Frame::Body);
        let vehicle = impedance_step(&self.vehicle, &reference, &w_ext, &p.vehicle, dt)?;

        // 7.–8. feedback generation and return link
        let w_int = interaction_feedback(&contact, &p.policy);
        let w_rec = recentering_wrench(&station, &p.policy);
        let w_fb = total_feedback(&w_rec, &w_int)?;
        if !w_fb.is_finite() {
            return Err(Error::NonFiniteState { what: "feedback" });
        }
        self.back.send(tick, w_fb);

        let f_h = internal_wrench(&station, &accel, &feedback, &p.station);

        self.station = station;
        self.reference = reference;
        self.vehicle = vehicle;
        self.tick += 1;

        Ok(StepRecord {
            tick,
            t: self.tick as f64 * dt,
            handle_p: to_array(&station.pose.position),
            handle_q: station.pose.orientation.wxyz(),
            handle_v: to_array(&station.twist.linear),
            handle_w: to_array(&station.twist.angular),
            f_a,
            v_cmd: to_array(&v_cmd),
            w_cmd: to_array(&w_cmd),
            p_ref: to_array(&reference.position),
            v_ref: to_array(&reference.velocity),
            q_ref: reference.orientation.wxyz(),
            w_ref: to_array(&reference.rate),
            p_s: to_array(&vehicle.position),
            v_s: to_array(&vehicle.velocity),
            q_s: vehicle.orientation.wxyz(),
            w_s: to_array(&vehicle.rate),
            f_k: to_array(&contact.force),
            tau_k: to_array(&contact.torque),
            w_rec: w_rec.to_array(),
            w_int: w_int.to_array(),
            w_fb: w_fb.to_array(),
            f_h: f_h.to_array(),
        })
    }
}
