//! Wire protocol of the live service: one JSON object per text frame.
//!
//! Client → server: `{"type":"hello","role":"driver"|"observer"}` and
//! `{"type":"input","mode":"pose"|"wrench","t":ms,"v":[6 numbers]}`.
//! Server → client: `{"type":"snapshot",...}` and `{"type":"error","msg":...}`.

use omniteleop_core::geom::exp_so3;
use omniteleop_core::station::{OperatorCommand, StationLimits};
use omniteleop_core::{OperatorInput, Pose, StepRecord, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Driver,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Handle pose offsets: position [m] and rotation vector [rad].
    Pose,
    /// Active wrench [N, N·m] in the handle frame.
    Wrench,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEvent {
    pub mode: Mode,
    /// Client clock [ms], nondecreasing.
    pub t: f64,
    pub v: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMsg {
    Hello { role: Role },
    Input { mode: Mode, t: f64, v: [f64; 6] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyMsg {
    pub p: [f64; 3],
    pub q: [f64; 4],
    pub v: [f64; 3],
    pub w: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    /// [s]
    pub t: f64,
    pub vehicle: BodyMsg,
    pub reference: PoseMsg,
    pub handle: PoseMsg,
    pub w_rec: [f64; 6],
    pub w_int: [f64; 6],
    pub w_fb: [f64; 6],
    pub contact: bool,
    pub contact_force: f64,
}

impl From<&StepRecord> for Snapshot {
    fn from(r: &StepRecord) -> Self {
        Self {
            tick: r.tick,
            t: r.t,
            vehicle: BodyMsg {
                p: r.p_s,
                q: r.q_s,
                v: r.v_s,
                w: r.w_s,
            },
            reference: PoseMsg { p: r.p_ref, q: r.q_ref },
            handle: PoseMsg {
                p: r.handle_p,
                q: r.handle_q,
            },
            w_rec: r.w_rec,
            w_int: r.w_int,
            w_fb: r.w_fb,
            contact: r.in_contact(),
            contact_force: r.contact_force(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMsg {
    Snapshot(Box<Snapshot>),
    Error { msg: String },
}

impl ServerMsg {
    pub fn error(msg: impl Into<String>) -> Self {
        ServerMsg::Error { msg: msg.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

impl InputEvent {
    /// Checks the event against the station clamps.
    pub fn validate(&self, limits: &StationLimits) -> Result<(), String> {
        if !self.t.is_finite() || self.v.iter().any(|x| !x.is_finite()) {
            return Err("input values must be finite".into());
        }
        let a = Vec3::new(self.v[0], self.v[1], self.v[2]);
        let b = Vec3::new(self.v[3], self.v[4], self.v[5]);
        match self.mode {
            Mode::Pose => {
                if a.norm() > limits.workspace_radius {
                    return Err(format!("handle offset {:.4} m exceeds the workspace radius", a.norm()));
                }
                if b.norm() > limits.max_angle {
                    return Err(format!("handle rotation {:.4} rad exceeds the angle limit", b.norm()));
                }
            }
            Mode::Wrench => {
                if a.norm() > limits.max_force {
                    return Err(format!("force {:.3} N exceeds the clamp", a.norm()));
                }
                if b.norm() > limits.max_torque {
                    return Err(format!("torque {:.3} N·m exceeds the clamp", b.norm()));
                }
            }
        }
        Ok(())
    }

    pub fn to_input(&self) -> OperatorInput {
        match self.mode {
            Mode::Pose => OperatorInput::Pose(Pose::new(
                Vec3::new(self.v[0], self.v[1], self.v[2]),
                exp_so3(&Vec3::new(self.v[3], self.v[4], self.v[5])),
            )),
            Mode::Wrench => OperatorInput::Wrench(OperatorCommand::from_array(self.v, self.t * 1e-3)),
        }
    }
}
