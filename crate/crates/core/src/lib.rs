#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Cosserat-rod dynamics of a tendon-driven continuum robot, solved by
//! BDF-α time discretization and shooting in arc length, with sliding mode
//! and backstepping controllers for the tip position.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod math;
pub mod rod;
pub mod scenario;
pub mod shooting;
pub mod tendon;

pub use error::{Error, Result};
