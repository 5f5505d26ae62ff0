//! SO(3)/SE(3) primitives shared by every stage of the loop.
//!
//! Rotations are unit quaternions (scalar first, Hamilton product) mapping
//! body coordinates into the parent frame. Matrices are only materialized
//! where an equation needs them (skew extraction, tracking errors).

use core::ops::{Add, Neg, Sub};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Maximum asymmetry `|M + Mᵀ|∞` accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Frame a twist or wrench is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Inertial world frame of the remote site.
    World,
    /// Vehicle body frame.
    Body,
    /// Idle frame of the haptic handle (the local inertial frame).
    Idle,
    /// Frame rigidly attached to the handle.
    Handle,
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Skew-symmetric matrix `[v]×` such that `hat(v) * u == v × u`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds [`SKEW_TOLERANCE`].
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asymmetry = (m + m.transpose()).abs().max();
    if asymmetry.is_nan() || asymmetry > SKEW_TOLERANCE {
        return Err(Error::NotSkewSymmetric { asymmetry });
    }
    Ok(vee_unchecked(m))
}

fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `½ (R − Rᵀ)ᵛ`, which equals `sin(θ)·axis` for a rotation of angle θ.
pub fn skew_part_vee(r: &Rotation) -> Vec3 {
    skew_part_vee_matrix(&r.matrix())
}

pub(crate) fn skew_part_vee_matrix(m: &Mat3) -> Vec3 {
    vee_unchecked(&((m - m.transpose()) * 0.5))
}

/// Rotation exponential of an axis-angle vector.
pub fn exp_so3(axis_angle: &Vec3) -> Rotation {
    let theta = axis_angle.norm();
    let half = 0.5 * theta;
    // sin(θ/2)/θ, with its series near zero.
    let sinc_half = if theta > 1e-6 {
        libm::sin(half) / theta
    } else {
        0.5 - theta * theta / 48.0
    };
    let v = axis_angle * sinc_half;
    Rotation::from_wxyz(libm::cos(half), v.x, v.y, v.z)
}

/// Advances `r` by a constant body rate for `dt` seconds: `R · exp([ω dt]×)`.
pub fn integrate_rotation(r: &Rotation, omega_body: &Vec3, dt: f64) -> Rotation {
    r.compose(&exp_so3(&(omega_body * dt)))
}

/// Unit quaternion rotation, canonicalized to `w ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from raw quaternion components, normalizing them.
    ///
    /// A zero or non-finite quaternion yields [`Error::NonFiniteState`].
    pub fn try_from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = libm::sqrt(w * w + x * x + y * y + z * z);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFiniteState {
                what: "quaternion construction",
            });
        }
        Ok(Self::from_wxyz(w, x, y, z))
    }

    fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = libm::sqrt(w * w + x * x + y * y + z * z);
        let s = if w < 0.0 { -1.0 / n } else { 1.0 / n };
        Rotation(UnitQuaternion::new_unchecked(Quaternion::new(
            w * s,
            x * s,
            y * s,
            z * s,
        )))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        exp_so3(&(axis * (angle / n)))
    }

    /// `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Mat3 {
        *self.0.to_rotation_matrix().matrix()
    }

    /// Body → parent.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Parent → body.
    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    /// `self · other`, renormalized.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let q = self.0.quaternion() * other.0.quaternion();
        Self::from_wxyz(q.w, q.i, q.j, q.k)
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.wxyz();
        Self::from_wxyz(w, -x, -y, -z)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let [w, x, y, z] = self.wxyz();
        2.0 * libm::atan2(libm::sqrt(x * x + y * y + z * z), w)
    }

    /// Geodesic distance to `other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.inverse().compose(other).angle()
    }

    /// Logarithm map: axis scaled by angle.
    pub fn axis_angle(&self) -> Vec3 {
        let [w, x, y, z] = self.wxyz();
        let v = Vec3::new(x, y, z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        v * (2.0 * libm::atan2(s, w) / s)
    }

    pub fn norm_error(&self) -> f64 {
        let [w, x, y, z] = self.wxyz();
        libm::fabs(libm::sqrt(w * w + x * x + y * y + z * z) - 1.0)
    }
}

/// Position plus orientation of a frame relative to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Rotation,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Rotation) -> Self {
        Self { position, orientation }
    }
}

/// Linear and angular velocity, tagged with the frame they are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
    pub frame: Frame,
}

impl Twist {
    pub fn zero(frame: Frame) -> Self {
        Self {
            linear: Vec3::zeros(),
            angular: Vec3::zeros(),
            frame,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        stack(&self.linear, &self.angular)
    }

    pub fn is_finite(&self) -> bool {
        is_finite(&self.linear) && is_finite(&self.angular)
    }
}

/// Force and torque, tagged with the frame they are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub frame: Frame,
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3, frame: Frame) -> Self {
        Self { force, torque, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros(), frame)
    }

    pub fn from_array(a: [f64; 6], frame: Frame) -> Self {
        Self::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]), frame)
    }

    pub fn to_array(&self) -> [f64; 6] {
        stack(&self.force, &self.torque)
    }

    pub fn is_finite(&self) -> bool {
        is_finite(&self.force) && is_finite(&self.torque)
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<&Self> {
        if self.frame == frame {
            Ok(self)
        } else {
            Err(Error::FrameMismatch {
                expected: frame,
                found: self.frame,
            })
        }
    }

    /// Re-expresses both vectors through `r` (parent → body when `inverse`).
    pub fn rotated(&self, r: &Rotation, inverse: bool, frame: Frame) -> Self {
        if inverse {
            Self::new(r.inverse_rotate(&self.force), r.inverse_rotate(&self.torque), frame)
        } else {
            Self::new(r.rotate(&self.force), r.rotate(&self.torque), frame)
        }
    }

    /// Sum of two wrenches expressed in the same frame.
    pub fn checked_add(&self, other: &Wrench) -> Result<Wrench> {
        other.expect_frame(self.frame)?;
        Ok(Wrench::new(
            self.force + other.force,
            self.torque + other.torque,
            self.frame,
        ))
    }
}

impl Neg for Wrench {
    type Output = Wrench;

    fn neg(self) -> Wrench {
        Wrench::new(-self.force, -self.torque, self.frame)
    }
}

fn stack(a: &Vec3, b: &Vec3) -> [f64; 6] {
    [a.x, a.y, a.z, b.x, b.y, b.z]
}

/// Diagonal 6×6 matrix acting on stacked `[translational; rotational]` vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diag6(pub [f64; 6]);

impl Diag6 {
    pub fn from_blocks(translational: f64, rotational: f64) -> Self {
        let (t, r) = (translational, rotational);
        Diag6([t, t, t, r, r, r])
    }

    pub fn zero() -> Self {
        Diag6([0.0; 6])
    }

    pub fn translational(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotational(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn all(&self, pred: impl Fn(f64) -> bool) -> bool {
        self.0.iter().all(|&d| pred(d))
    }
}

impl Add for Diag6 {
    type Output = Diag6;

    fn add(self, rhs: Diag6) -> Diag6 {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Diag6(out)
    }
}

impl Sub for Diag6 {
    type Output = Diag6;

    fn sub(self, rhs: Diag6) -> Diag6 {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        Diag6(out)
    }
}
