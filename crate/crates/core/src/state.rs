//! Robot pose and velocity command types.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar pose `[x, y, theta]` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, other: &RobotState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Component-wise difference with the heading difference wrapped.
    pub fn error_to(&self, other: &RobotState) -> [f64; 3] {
        [
            self.x - other.x,
            self.y - other.y,
            wrap_angle(self.theta - other.theta),
        ]
    }
}

impl From<[f64; 3]> for RobotState {
    fn from(a: [f64; 3]) -> Self {
        Self::from_array(a)
    }
}

impl From<RobotState> for [f64; 3] {
    fn from(s: RobotState) -> Self {
        s.to_array()
    }
}

/// World-frame velocity command `[vx, vy, omega]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    /// Projects onto the box `|vx|, |vy| <= v_max`, `|omega| <= omega_max`.
    pub fn clamped(self, v_max: f64, omega_max: f64) -> Self {
        Self::new(
            self.vx.clamp(-v_max, v_max),
            self.vy.clamp(-v_max, v_max),
            self.omega.clamp(-omega_max, omega_max),
        )
    }
}

impl Add for ControlInput {
    type Output = ControlInput;
    fn add(self, o: Self) -> Self {
        Self::new(self.vx + o.vx, self.vy + o.vy, self.omega + o.omega)
    }
}

impl Sub for ControlInput {
    type Output = ControlInput;
    fn sub(self, o: Self) -> Self {
        Self::new(self.vx - o.vx, self.vy - o.vy, self.omega - o.omega)
    }
}

/// Single-integrator step: `x + dt * u` with the heading wrapped.
pub fn step_dynamics(state: RobotState, input: ControlInput, dt: f64) -> Result<RobotState> {
    if !state.is_finite() {
        return Err(Error::NonFinite("robot state"));
    }
    if !input.is_finite() {
        return Err(Error::NonFinite("control input"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    Ok(RobotState::new(
        state.x + dt * input.vx,
        state.y + dt * input.vy,
        wrap_angle(state.theta + dt * input.omega),
    ))
}
