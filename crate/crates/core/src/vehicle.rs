//! Impedance-controlled omnidirectional vehicle.
//!
//! The flight controller is assumed to render exactly
//! `M_v·accel + D_v·[e_v; e_ω] + K_v·[e_p; e_R] = w_ext` in the body frame,
//! with gravity and rotor allocation perfectly compensated.

use crate::error::{ensure, Error, Result};
use crate::geom::{integrate_rotation, is_finite, skew_part_vee_matrix, Diag6, Frame, Rotation, Vec3, Wrench};
use crate::policy::ReferenceState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub inertia: Diag6,
    pub damping: Diag6,
    pub stiffness: Diag6,
    pub tool_offset: Vec3,
}

impl Default for VehicleParams {
    /// Placeholder gains for a small omnidirectional platform: 4 kg,
    /// 0.08 kg·m², 100 N/m, 5 N·m/rad, critically damped.
    fn default() -> Self {
        let inertia = Diag6::from_blocks(4.0, 0.08);
        let stiffness = Diag6::from_blocks(100.0, 5.0);
        Self {
            inertia,
            damping: critical_damping(&inertia, &stiffness, 1.0),
            stiffness,
            tool_offset: Vec3::new(0.6, 0.0, 0.0),
        }
    }
}

/// `D = 2ζ√(M K)` per axis.
pub fn critical_damping(inertia: &Diag6, stiffness: &Diag6, zeta: f64) -> Diag6 {
    let mut d = [0.0; 6];
    for (i, d) in d.iter_mut().enumerate() {
        *d = 2.0 * zeta * libm::sqrt(inertia.0[i] * stiffness.0[i]);
    }
    Diag6(d)
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.inertia.all(|d| d > 0.0 && d.is_finite()),
            "vehicle.inertia",
            "entries must be positive",
        )?;
        ensure(
            self.damping.all(|d| d > 0.0 && d.is_finite()),
            "vehicle.damping",
            "entries must be positive",
        )?;
        ensure(
            self.stiffness.all(|d| d >= 0.0 && d.is_finite()),
            "vehicle.stiffness",
            "entries must be non-negative",
        )?;
        ensure(
            is_finite(&self.tool_offset) && self.tool_offset.norm() < 2.0,
            "vehicle.tool_offset",
            "must be finite and shorter than 2 m",
        )
    }
}

/// World-frame position and velocity, body-frame angular rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: Rotation,
    pub rate: Vec3,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            orientation: Rotation::identity(),
            rate: Vec3::zeros(),
        }
    }
}

impl VehicleState {
    pub fn at(position: Vec3, orientation: Rotation) -> Self {
        Self {
            position,
            orientation,
            ..Self::default()
        }
    }

    /// Reference that this state tracks perfectly.
    pub fn as_reference(&self) -> ReferenceState {
        ReferenceState {
            position: self.position,
            velocity: self.velocity,
            orientation: self.orientation,
            rate: self.rate,
        }
    }

    fn is_finite(&self) -> bool {
        is_finite(&self.position) && is_finite(&self.velocity) && is_finite(&self.rate)
    }
}

/// Tracking errors, all in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub position: Vec3,
    pub attitude: Vec3,
    pub velocity: Vec3,
    pub rate: Vec3,
}

pub fn tracking_errors(state: &VehicleState, reference: &ReferenceState) -> TrackingErrors {
    let r_s = &state.orientation;
    let r_ref = &reference.orientation;
    // R_refᵀ R_S; its skew part is ½(R_refᵀR_S − R_SᵀR_ref)ᵛ.
    let relative = r_ref.inverse().compose(r_s);
    TrackingErrors {
        position: r_s.inverse_rotate(&(state.position - reference.position)),
        attitude: skew_part_vee_matrix(&relative.matrix()),
        velocity: r_s.inverse_rotate(&(state.velocity - reference.velocity)),
        rate: state.rate - relative.inverse_rotate(&reference.rate),
    }
}

/// Body-frame acceleration `[linear; angular]` rendered by the impedance law.
pub fn impedance_accel(errors: &TrackingErrors, external: &Wrench, params: &VehicleParams) -> [f64; 6] {
    let e_pose = [
        errors.position.x,
        errors.position.y,
        errors.position.z,
        errors.attitude.x,
        errors.attitude.y,
        errors.attitude.z,
    ];
    let e_twist = [
        errors.velocity.x,
        errors.velocity.y,
        errors.velocity.z,
        errors.rate.x,
        errors.rate.y,
        errors.rate.z,
    ];
    let w = external.to_array();
    let mut a = [0.0; 6];
    for i in 0..6 {
        a[i] = (w[i] - params.damping.0[i] * e_twist[i] - params.stiffness.0[i] * e_pose[i]) / params.inertia.0[i];
    }
    a
}

/// Advances the vehicle by `dt` (semi-implicit Euler: twist first, then pose).
pub fn impedance_step(
    state: &VehicleState,
    reference: &ReferenceState,
    external: &Wrench,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    ensure(dt > 0.0 && dt <= 0.01, "dt", "must lie in (0, 0.01] s")?;
    external.expect_frame(Frame::Body)?;
    let errors = tracking_errors(state, reference);
    let a = impedance_accel(&errors, external, params);
    let linear = state.orientation.rotate(&Vec3::new(a[0], a[1], a[2]));
    let velocity = state.velocity + linear * dt;
    let rate = state.rate + Vec3::new(a[3], a[4], a[5]) * dt;
    let next = VehicleState {
        position: state.position + velocity * dt,
        velocity,
        orientation: integrate_rotation(&state.orientation, &rate, dt),
        rate,
    };
    if !next.is_finite() || a.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFiniteState { what: "impedance_step" });
    }
    Ok(next)
}

/// World-frame position and velocity of the tool tip.
pub fn tool_tip_state(state: &VehicleState, tool_offset: &Vec3) -> (Vec3, Vec3) {
    let r = &state.orientation;
    (
        state.position + r.rotate(tool_offset),
        state.velocity + r.rotate(&state.rate.cross(tool_offset)),
    )
}

/// Energy stored in the tracking errors: kinetic error energy plus the
/// translational spring and the rotational potential `K_r (1 − cos θ)`.
///
/// The rotational term is the potential of the impedance torque only when
/// `K_r` is isotropic; the mean of its entries is used.
pub fn error_energy(state: &VehicleState, reference: &ReferenceState, params: &VehicleParams) -> f64 {
    let e = tracking_errors(state, reference);
    let m_t = params.inertia.translational();
    let m_r = params.inertia.rotational();
    let k_t = params.stiffness.translational();
    let k_r = params.stiffness.rotational().sum() / 3.0;
    let relative = reference.orientation.inverse().compose(&state.orientation);
    let [_, x, y, z] = relative.wxyz();
    // 1 − cos θ = 2 sin²(θ/2)
    let one_minus_cos = 2.0 * (x * x + y * y + z * z);
    0.5 * e.velocity.component_mul(&e.velocity).dot(&m_t)
        + 0.5 * e.rate.component_mul(&e.rate).dot(&m_r)
        + 0.5 * e.position.component_mul(&e.position).dot(&k_t)
        + k_r * one_minus_cos
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1e-3;

    fn body(f: [f64; 6]) -> Wrench {
        Wrench::from_array(f, Frame::Body)
    }

    #[test]
    fn perfect_tracking_has_zero_errors() {
        let s = VehicleState {
            position: Vec3::new(1.0, 2.0, 3.0),
            velocity: Vec3::new(0.1, 0.0, -0.2),
            orientation: Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 0.5), 0.7),
            rate: Vec3::new(0.3, -0.1, 0.2),
        };
        let e = tracking_errors(&s, &s.as_reference());
        for v in [e.position, e.attitude, e.velocity, e.rate] {
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn tracking_error_examples() {
        let s = VehicleState::at(Vec3::new(1.0, 0.0, 0.0), Rotation::identity());
        let e = tracking_errors(&s, &ReferenceState::default());
        assert_eq!(e.position, Vec3::new(1.0, 0.0, 0.0));

        let s = VehicleState::at(Vec3::zeros(), Rotation::from_axis_angle(&Vec3::z(), 30f64.to_radians()));
        let e = tracking_errors(&s, &ReferenceState::default());
        assert!((e.attitude - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn rate_error_uses_relative_attitude() {
        // Reference yawed 90°, spinning about its own x; vehicle at identity.
        let reference = ReferenceState {
            orientation: Rotation::from_axis_angle(&Vec3::z(), 90f64.to_radians()),
            rate: Vec3::x(),
            ..ReferenceState::default()
        };
        let e = tracking_errors(&VehicleState::default(), &reference);
        // R_Sᵀ R_ref ω_ref = R_z(90°)·x = y
        assert!((e.rate - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let s = VehicleState::at(Vec3::new(0.5, -1.0, 2.0), Rotation::from_axis_angle(&Vec3::y(), 0.2));
        let next = impedance_step(&s, &s.as_reference(), &body([0.0; 6]), &VehicleParams::default(), DT).unwrap();
        assert!((next.position - s.position).norm() < 1e-15);
        assert!(next.orientation.angle_to(&s.orientation) < 1e-15);
        assert_eq!(next.velocity, Vec3::zeros());
    }

    #[test]
    fn static_deflection_under_constant_force() {
        let params = VehicleParams::default();
        let reference = ReferenceState::default();
        let mut s = VehicleState::default();
        let w = body([10.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for _ in 0..20_000 {
            s = impedance_step(&s, &reference, &w, &params, DT).unwrap();
        }
        let e = tracking_errors(&s, &reference);
        assert!((e.position.x - 0.1).abs() < 1e-3);
    }

    #[test]
    fn step_response_overshoot_matches_damping_ratio() {
        // Second-order oracle: overshoot = exp(−πζ/√(1−ζ²)).
        let zeta: f64 = 0.5;
        let mut params = VehicleParams::default();
        params.damping = critical_damping(&params.inertia, &params.stiffness, zeta);
        let expected = libm::exp(-core::f64::consts::PI * zeta / libm::sqrt(1.0 - zeta * zeta));
        let reference = ReferenceState::at(Vec3::new(1.0, 0.0, 0.0), Rotation::identity());
        let mut s = VehicleState::default();
        let mut peak: f64 = 0.0;
        for _ in 0..10_000 {
            s = impedance_step(&s, &reference, &body([0.0; 6]), &params, DT).unwrap();
            peak = peak.max(s.position.x);
        }
        assert!((peak - 1.0 - expected).abs() < 5e-3, "overshoot {}", peak - 1.0);
        assert!((s.position.x - 1.0).abs() < 1e-6);

        // Critically damped: no overshoot beyond integration error.
        let params = VehicleParams::default();
        let mut s = VehicleState::default();
        let mut peak: f64 = 0.0;
        for _ in 0..10_000 {
            s = impedance_step(&s, &reference, &body([0.0; 6]), &params, DT).unwrap();
            peak = peak.max(s.position.x);
        }
        assert!(peak - 1.0 < 1e-3);
    }

    #[test]
    fn tool_tip_examples() {
        let r = Vec3::new(0.6, 0.0, 0.0);
        let s = VehicleState::at(Vec3::new(1.0, 2.0, 3.0), Rotation::identity());
        let (p, v) = tool_tip_state(&s, &r);
        assert_eq!(p, Vec3::new(1.6, 2.0, 3.0));
        assert_eq!(v, Vec3::zeros());

        let mut s = VehicleState {
            rate: Vec3::z(),
            ..VehicleState::default()
        };
        let (_, v) = tool_tip_state(&s, &r);
        assert!((v - Vec3::new(0.0, 0.6, 0.0)).norm() < 1e-15);

        s.velocity = Vec3::new(0.1, 0.2, 0.3);
        let (p, v) = tool_tip_state(&s, &Vec3::zeros());
        assert_eq!((p, v), (s.position, s.velocity));
    }

    #[test]
    fn rejects_body_frame_mismatch() {
        let s = VehicleState::default();
        let w = Wrench::zero(Frame::World);
        assert!(impedance_step(&s, &s.as_reference(), &w, &VehicleParams::default(), DT).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut params = VehicleParams::default();
        params.inertia.0[0] = 1e-300;
        let s = VehicleState::at(Vec3::new(1e10, 0.0, 0.0), Rotation::identity());
        let r = impedance_step(&s, &ReferenceState::default(), &body([0.0; 6]), &params, DT);
        assert!(matches!(r, Err(Error::NonFiniteState { .. })));
    }
}
