//! Deterministic simulation core for 6DoF bilateral teleoperation of an
//! omnidirectional aerial vehicle.
//!
//! The crate is `no_std` with `alloc` when built without the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod contact;
pub mod error;
pub mod experiments;
pub mod geom;
pub mod link;
pub mod operator;
pub mod policy;
pub mod station;
pub mod vehicle;
pub mod world;

pub use error::{Error, Result};
pub use geom::{Diag6, Frame, Pose, Rotation, Twist, Vec3, Wrench};
pub use operator::Operator;
pub use world::{InitialState, OperatorInput, SimParams, StepRecord, World};
