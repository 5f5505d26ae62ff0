//! Penalty contact between the tool tip and a planar wall, with
//! tanh-regularized Coulomb friction.

use crate::error::{ensure, Result};
use crate::geom::{is_finite, Vec3};
use crate::policy::ContactMeasurement;
use crate::vehicle::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallModel {
    /// Any point on the wall surface [m].
    pub point: Vec3,
    /// Unit normal pointing out of the wall, into free space.
    pub normal: Vec3,
    /// [N/m]
    pub stiffness: f64,
    /// Compression-only normal damping [N·s/m].
    pub damping: f64,
    /// Coulomb coefficient.
    pub friction: f64,
    /// Velocity scale of the tanh stiction regularization [m/s].
    pub stiction_velocity: f64,
}

impl WallModel {
    pub fn validate(&self) -> Result<()> {
        ensure(
            is_finite(&self.point) && is_finite(&self.normal),
            "wall",
            "point and normal must be finite",
        )?;
        ensure(
            (self.normal.norm() - 1.0).abs() < 1e-9,
            "wall.normal",
            "must be a unit vector",
        )?;
        ensure(self.stiffness >= 0.0, "wall.stiffness", "must be non-negative")?;
        ensure(self.damping >= 0.0, "wall.damping", "must be non-negative")?;
        ensure(self.friction >= 0.0, "wall.friction", "must be non-negative")?;
        ensure(
            self.stiction_velocity > 0.0,
            "wall.stiction_velocity",
            "must be positive",
        )
    }

    /// Depth of `p` below the wall surface, zero outside.
    pub fn penetration(&self, p: &Vec3) -> f64 {
        (-(p - self.point).dot(&self.normal)).max(0.0)
    }
}

/// World-frame normal and friction forces at the tip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactForces {
    pub normal: Vec3,
    pub friction: Vec3,
}

pub fn contact_forces(tip_pos: &Vec3, tip_vel: &Vec3, wall: &WallModel) -> ContactForces {
    let depth = wall.penetration(tip_pos);
    if depth <= 0.0 {
        return ContactForces::default();
    }
    let n = wall.normal;
    let v_n = tip_vel.dot(&n);
    // Damping only while compressing, so the total force is never adhesive.
    let magnitude = wall.stiffness * depth + wall.damping * (-v_n).max(0.0);
    let normal = n * magnitude;
    let v_t = tip_vel - n * v_n;
    let speed = v_t.norm();
    let friction = if speed > 0.0 {
        -v_t * (wall.friction * magnitude * libm::tanh(speed / wall.stiction_velocity) / speed)
    } else {
        Vec3::zeros()
    };
    ContactForces { normal, friction }
}

/// Contact force on the vehicle expressed in its body frame; point contact, so
/// the torque at the tip is zero.
pub fn contact_wrench(tip_pos: &Vec3, tip_vel: &Vec3, wall: &WallModel, state: &VehicleState) -> ContactMeasurement {
    let f = contact_forces(tip_pos, tip_vel, wall);
    ContactMeasurement {
        force: state.orientation.inverse_rotate(&(f.normal + f.friction)),
        torque: Vec3::zeros(),
    }
}
