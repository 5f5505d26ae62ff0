//! Local station: the operator's arm rigidly grasping an admittance-rendered
//! haptic handle.
//!
//! Human dynamics and device dynamics share the handle twist, so the two
//! equations are summed and the internal grasp wrench drops out:
//!
//! `(M_h + M_a)·accel + (D_h + D_a)·twist = f_a + w_fb`
//!
//! The grasp wrench is reconstructed afterwards by [`internal_wrench`].

use crate::error::{ensure, Error, Result};
use crate::geom::{integrate_rotation, skew_part_vee, Diag6, Frame, Pose, Rotation, Twist, Vec3, Wrench};

/// Inertia and damping of the operator and of the admittance filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationParams {
    pub human_inertia: Diag6,
    pub human_damping: Diag6,
    pub admittance_inertia: Diag6,
    pub admittance_damping: Diag6,
}

impl Default for StationParams {
    /// Admittance values of the reference experiments; the operator's own
    /// inertia and damping are unknown and disabled.
    fn default() -> Self {
        Self {
            human_inertia: Diag6::zero(),
            human_damping: Diag6::zero(),
            admittance_inertia: Diag6::from_blocks(10.0, 1.0),
            admittance_damping: Diag6::from_blocks(5.0, 1.0),
        }
    }
}

impl StationParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.admittance_inertia.all(|d| d > 0.0 && d.is_finite()),
            "station.admittance_inertia",
            "entries must be positive",
        )?;
        ensure(
            self.admittance_damping.all(|d| d > 0.0 && d.is_finite()),
            "station.admittance_damping",
            "entries must be positive",
        )?;
        ensure(
            self.human_inertia.all(|d| d >= 0.0 && d.is_finite()),
            "station.human_inertia",
            "entries must be non-negative",
        )?;
        ensure(
            self.human_damping.all(|d| d >= 0.0 && d.is_finite()),
            "station.human_damping",
            "entries must be non-negative",
        )
    }

    pub fn total_inertia(&self) -> Diag6 {
        self.human_inertia + self.admittance_inertia
    }

    pub fn total_damping(&self) -> Diag6 {
        self.human_damping + self.admittance_damping
    }
}

/// Safety rails of the simulated device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationLimits {
    /// Radius of the reachable handle workspace [m]; `f64::INFINITY` disables it.
    pub workspace_radius: f64,
    /// Largest handle rotation angle [rad]; must stay below π/2.
    pub max_angle: f64,
    /// Operator force clamp [N].
    pub max_force: f64,
    /// Operator torque clamp [N·m].
    pub max_torque: f64,
}

impl Default for StationLimits {
    fn default() -> Self {
        Self {
            workspace_radius: 0.3,
            max_angle: 85f64.to_radians(),
            max_force: 200.0,
            max_torque: 20.0,
        }
    }
}

impl StationLimits {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.workspace_radius > 0.0,
            "station.workspace_radius",
            "must be positive",
        )?;
        ensure(
            self.max_angle > 0.0 && self.max_angle < core::f64::consts::FRAC_PI_2,
            "station.max_handle_angle",
            "must lie in (0, 90) degrees",
        )?;
        ensure(self.max_force > 0.0, "station.max_force", "must be positive")?;
        ensure(self.max_torque > 0.0, "station.max_torque", "must be positive")
    }
}

/// Handle pose relative to its idle frame, twist expressed in the handle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationState {
    pub pose: Pose,
    pub twist: Twist,
}

impl Default for StationState {
    fn default() -> Self {
        Self {
            pose: Pose::default(),
            twist: Twist::zero(Frame::Handle),
        }
    }
}

impl StationState {
    pub fn at_pose(pose: Pose) -> Self {
        Self {
            pose,
            twist: Twist::zero(Frame::Handle),
        }
    }

    /// `½ twistᵀ M twist`.
    pub fn kinetic_energy(&self, inertia: &Diag6) -> f64 {
        let v = self.twist.to_array();
        0.5 * v.iter().zip(inertia.0).map(|(v, m)| m * v * v).sum::<f64>()
    }

    /// Stacked handle displacement `[p_H; ½(R_H − R_Hᵀ)ᵛ]`.
    pub fn displacement(&self) -> [f64; 6] {
        let p = self.pose.position;
        let r = skew_part_vee(&self.pose.orientation);
        [p.x, p.y, p.z, r.x, r.y, r.z]
    }

    fn is_finite(&self) -> bool {
        crate::geom::is_finite(&self.pose.position) && self.twist.is_finite()
    }
}

/// Active wrench from the operator's muscles, expressed in the handle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCommand {
    pub wrench: Wrench,
    pub timestamp: f64,
}

impl OperatorCommand {
    pub fn idle(timestamp: f64) -> Self {
        Self {
            wrench: Wrench::zero(Frame::Handle),
            timestamp,
        }
    }

    pub fn from_array(a: [f64; 6], timestamp: f64) -> Self {
        Self {
            wrench: Wrench::from_array(a, Frame::Handle),
            timestamp,
        }
    }

    /// Scales force and torque down to the configured magnitudes.
    pub fn clamped(&self, limits: &StationLimits) -> Self {
        let clamp = |v: Vec3, max: f64| {
            let n = v.norm();
            if n > max {
                v * (max / n)
            } else {
                v
            }
        };
        Self {
            wrench: Wrench::new(
                clamp(self.wrench.force, limits.max_force),
                clamp(self.wrench.torque, limits.max_torque),
                self.wrench.frame,
            ),
            timestamp: self.timestamp,
        }
    }
}

/// Result of one station tick: the new state plus the acceleration used, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationStep {
    pub state: StationState,
    /// Handle acceleration in the handle frame, `[linear; angular]`.
    pub accel: [f64; 6],
}

/// Advances the station by `dt` with semi-implicit Euler.
///
/// `feedback` is expressed in the idle frame and re-expressed in the handle
/// frame here. Motion that would leave the workspace (or exceed the angle
/// limit) has its outward velocity component removed.
pub fn station_step(
    state: &StationState,
    cmd: &OperatorCommand,
    feedback: &Wrench,
    params: &StationParams,
    limits: &StationLimits,
    dt: f64,
) -> Result<StationStep> {
    ensure(dt > 0.0 && dt <= 0.01, "dt", "must lie in (0, 0.01] s")?;
    cmd.wrench.expect_frame(Frame::Handle)?;
    feedback.expect_frame(Frame::Idle)?;

    let r = state.pose.orientation;
    let fb = feedback.rotated(&r, true, Frame::Handle);
    let cmd = cmd.clamped(limits);
    let drive = cmd.wrench.to_array();
    let fb = fb.to_array();
    let twist = state.twist.to_array();
    let m = params.total_inertia().0;
    let d = params.total_damping().0;

    let mut accel = [0.0; 6];
    let mut next = [0.0; 6];
    for i in 0..6 {
        accel[i] = (drive[i] + fb[i] - d[i] * twist[i]) / m[i];
        next[i] = twist[i] + accel[i] * dt;
    }
    let mut v = Vec3::new(next[0], next[1], next[2]);
    let mut w = Vec3::new(next[3], next[4], next[5]);

    // Translation: p ← p + R·v·dt, blocked at the workspace boundary.
    let mut v_idle = r.rotate(&v);
    let mut p = state.pose.position + v_idle * dt;
    let radius = limits.workspace_radius;
    if p.norm() > radius {
        let n = p.normalize();
        let outward = v_idle.dot(&n);
        if outward > 0.0 {
            v_idle -= n * outward;
        }
        p = state.pose.position + v_idle * dt;
        // Tangential motion along the sphere still drifts outward by O(dt²).
        let norm = p.norm();
        if norm > radius {
            p *= radius / norm;
        }
        v = r.inverse_rotate(&v_idle);
    }

    // Orientation: exact exponential, blocked at the angle limit.
    let mut orientation = integrate_rotation(&r, &w, dt);
    if orientation.angle() > limits.max_angle {
        let axis = orientation.axis_angle().normalize();
        // The rotation axis is shared by the idle and handle frames.
        let outward = w.dot(&axis);
        if outward > 0.0 {
            w -= axis * outward;
        }
        orientation = integrate_rotation(&r, &w, dt);
        if orientation.angle() > limits.max_angle {
            orientation = Rotation::from_axis_angle(&orientation.axis_angle(), limits.max_angle);
        }
    }

    let state = StationState {
        pose: Pose::new(p, orientation),
        twist: Twist {
            linear: v,
            angular: w,
            frame: Frame::Handle,
        },
    };
    if !state.is_finite() || accel.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFiniteState { what: "station_step" });
    }
    Ok(StationStep { state, accel })
}

/// Grasp wrench `f_h = M_a·accel + D_a·twist − w_fb` in the handle frame.
///
/// `feedback` is expressed in the idle frame like in [`station_step`].
pub fn internal_wrench(state: &StationState, accel: &[f64; 6], feedback: &Wrench, params: &StationParams) -> Wrench {
    let fb = feedback
        .rotated(&state.pose.orientation, true, Frame::Handle)
        .to_array();
    let twist = state.twist.to_array();
    let m = params.admittance_inertia.0;
    let d = params.admittance_damping.0;
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = m[i] * accel[i] + d[i] * twist[i] - fb[i];
    }
    Wrench::from_array(out, Frame::Handle)
}
