//! Object-based semantic control barrier functions for mobile navigation.
//!
//! The pipeline simulates a depth camera in a box world, maintains a library
//! of per-object TSDFs with a consistency belief each, projects them into a
//! 2.5D signed-distance barrier and tracks a goal with a CBF-constrained MPC.

// Negated comparisons reject NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cbf;
pub mod consistency;
pub mod error;
pub mod grid;
pub mod harness;
pub mod mapping;
pub mod mpc;
pub mod qp;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use state::{step_dynamics, wrap_angle, ControlInput, RobotState};
