//! Teleoperation law: rate-control reference generation and feedback
//! wrench composition (recentering plus interaction).

use crate::error::{ensure, Result};
use crate::geom::{integrate_rotation, skew_part_vee, Diag6, Frame, Rotation, Vec3, Wrench};
use crate::station::StationState;

/// Per-component handle displacement below which that component generates
/// no reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deadband {
    /// [m]
    pub translation: f64,
    /// Applied to the components of `½(R_H − R_Hᵀ)ᵛ`.
    pub rotation: f64,
}

impl Default for Deadband {
    fn default() -> Self {
        Self {
            translation: 1e-3,
            rotation: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    /// Translational rate gain [1/s].
    pub v_max: f64,
    /// Rotational rate gain [1/s].
    pub omega_max: f64,
    /// `diag(K_t, K_r)` of the recentering spring.
    pub recentering_stiffness: Diag6,
    /// Vehicle center of mass to tool contact point, body frame [m].
    pub tool_offset: Vec3,
    pub deadband: Option<Deadband>,
    /// Optional re-expression of handle commands for a viewpoint that is not
    /// aligned with the vehicle body frame. `None` keeps the onboard view.
    pub view: Option<Rotation>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max: 1.0,
            recentering_stiffness: Diag6::from_blocks(50.0, 2.0),
            tool_offset: Vec3::new(0.6, 0.0, 0.0),
            deadband: Some(Deadband::default()),
            view: None,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.v_max > 0.0 && self.v_max.is_finite(),
            "policy.v_max",
            "must be positive",
        )?;
        ensure(
            self.omega_max > 0.0 && self.omega_max.is_finite(),
            "policy.omega_max",
            "must be positive",
        )?;
        ensure(
            self.recentering_stiffness.all(|k| k >= 0.0 && k.is_finite()),
            "policy.recentering_stiffness",
            "entries must be non-negative",
        )?;
        ensure(
            self.tool_offset.norm() < 2.0,
            "vehicle.tool_offset",
            "must be shorter than 2 m",
        )?;
        if let Some(db) = self.deadband {
            ensure(
                db.translation >= 0.0 && db.rotation >= 0.0,
                "policy.deadband",
                "must be non-negative",
            )?;
        }
        Ok(())
    }
}

/// Commanded vehicle reference, world-frame position and velocity, body-frame rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: Rotation,
    pub rate: Vec3,
}

impl Default for ReferenceState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            orientation: Rotation::identity(),
            rate: Vec3::zeros(),
        }
    }
}

impl ReferenceState {
    pub fn at(position: Vec3, orientation: Rotation) -> Self {
        Self {
            position,
            orientation,
            ..Self::default()
        }
    }
}

/// Contact force and torque measured at the tool, vehicle body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactMeasurement {
    pub force: Vec3,
    pub torque: Vec3,
}

impl ContactMeasurement {
    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros() && self.torque == Vec3::zeros()
    }
}

/// `v_ref^S = v_max · p_H`.
pub fn velocity_reference(handle: &StationState, params: &PolicyParams) -> Vec3 {
    handle.pose.position * params.v_max
}

/// `ω_ref^S = (ω_max/2)(R_H − R_Hᵀ)ᵛ`. Its magnitude is `ω_max·|sin θ|`.
pub fn rate_reference(handle: &StationState, params: &PolicyParams) -> Vec3 {
    skew_part_vee(&handle.pose.orientation) * params.omega_max
}

/// Body-frame velocity and rate commands for the current handle state, after
/// the deadband and the optional view re-expression.
pub fn reference_twist(handle: &StationState, params: &PolicyParams) -> (Vec3, Vec3) {
    let mut v = velocity_reference(handle, params);
    let mut w = rate_reference(handle, params);
    if let Some(db) = params.deadband {
        let p = handle.pose.position;
        let r = skew_part_vee(&handle.pose.orientation);
        for i in 0..3 {
            if p[i].abs() < db.translation {
                v[i] = 0.0;
            }
            if r[i].abs() < db.rotation {
                w[i] = 0.0;
            }
        }
    }
    if let Some(view) = params.view {
        v = view.rotate(&v);
        w = view.rotate(&w);
    }
    (v, w)
}

/// Integrates the references one tick. The body-frame velocity command is
/// rotated into the world through the current reference attitude.
pub fn integrate_references(reference: &ReferenceState, v_body: &Vec3, omega_body: &Vec3, dt: f64) -> ReferenceState {
    let velocity = reference.orientation.rotate(v_body);
    ReferenceState {
        position: reference.position + velocity * dt,
        velocity,
        orientation: integrate_rotation(&reference.orientation, omega_body, dt),
        rate: *omega_body,
    }
}

/// `w_rec = −K_rec [p_H; ½(R_H − R_Hᵀ)ᵛ]`, idle frame.
pub fn recentering_wrench(handle: &StationState, params: &PolicyParams) -> Wrench {
    let k = &params.recentering_stiffness;
    let p = handle.pose.position;
    let s = skew_part_vee(&handle.pose.orientation);
    Wrench::new(
        -k.translational().component_mul(&p),
        -k.rotational().component_mul(&s),
        Frame::Idle,
    )
}

/// `w_int = [f_K; τ_K + r_ST × f_K]`, idle frame (aligned with the body frame).
pub fn interaction_feedback(contact: &ContactMeasurement, params: &PolicyParams) -> Wrench {
    interaction_wrench(contact, &params.tool_offset, Frame::Idle)
}

/// Contact wrench about the vehicle center of mass, expressed in `frame`.
pub fn interaction_wrench(contact: &ContactMeasurement, tool_offset: &Vec3, frame: Frame) -> Wrench {
    Wrench::new(contact.force, contact.torque + tool_offset.cross(&contact.force), frame)
}

/// `w_fb = w_rec + w_int`.
pub fn total_feedback(recenter: &Wrench, interaction: &Wrench) -> Result<Wrench> {
    recenter.expect_frame(Frame::Idle)?;
    recenter.checked_add(interaction)
}
