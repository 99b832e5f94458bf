use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cbf::CbfParams;
use crate::consistency::ConsistencyParams;
use crate::error::{Error, Result};
use crate::mapping::MapParams;
use crate::mpc::ControllerParams;
use crate::sim::{DepthCamera, SceneEvent, World, WorldObject};
use crate::state::RobotState;

/// Which barrier the controller sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    SemanticMpcCbf,
    NonsemanticMpcCbf,
    ClassicMpc,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SemanticMpcCbf, Mode::NonsemanticMpcCbf, Mode::ClassicMpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SemanticMpcCbf => "semantic_mpc_cbf",
            Mode::NonsemanticMpcCbf => "nonsemantic_mpc_cbf",
            Mode::ClassicMpc => "classic_mpc",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!(
                "unknown mode `{s}` (expected semantic_mpc_cbf, nonsemantic_mpc_cbf or classic_mpc)"
            )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [0.0, 0.0],
            max: [6.4, 6.4],
        }
    }
}

impl Workspace {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub start: RobotState,
    pub goal: RobotState,
}

/// Localization error injected into the pose the robot believes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseNoise {
    pub sigma_xy: f64,
    pub sigma_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Ticks at which the barrier grid is written as CSV.
    pub field_snapshot_ticks: Vec<usize>,
    /// Ticks at which the scene TSDF is written in binary form.
    pub tsdf_snapshot_ticks: Vec<usize>,
}

fn default_duration() -> f64 {
    30.0
}

fn default_goal_tolerance() -> f64 {
    0.1
}

/// A complete closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub workspace: Workspace,
    #[serde(default)]
    pub objects: Vec<WorldObject>,
    #[serde(default)]
    pub events: Vec<SceneEvent>,
    pub robot: RobotSpec,
    #[serde(default)]
    pub camera: DepthCamera,
    #[serde(default)]
    pub map: MapParams,
    #[serde(default)]
    pub consistency: ConsistencyParams,
    #[serde(default)]
    pub cbf: CbfParams,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pose_noise: PoseNoise,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    /// Pins every boundary label to `E[v] = 1 / lambda_c`, `s = 1` when building the field.
    #[serde(default)]
    pub pin_labels: bool,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Scenario {
    /// Parses a scenario, reporting schema violations with their field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let ws = &self.workspace;
        if !(ws.min[0] < ws.max[0] && ws.min[1] < ws.max[1]) {
            return Err(Error::Scenario("workspace is empty".into()));
        }
        for (what, s) in [("start", &self.robot.start), ("goal", &self.robot.goal)] {
            if !s.is_finite() || !ws.contains(s.position()) {
                return Err(Error::Scenario(format!("robot {what} must lie inside the workspace")));
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Scenario("duration must be positive".into()));
        }
        if !(self.goal_tolerance > 0.0) {
            return Err(Error::Scenario("goal_tolerance must be positive".into()));
        }
        if !(self.pose_noise.sigma_xy >= 0.0 && self.pose_noise.sigma_theta >= 0.0) {
            return Err(Error::Scenario("pose noise sigmas must be non-negative".into()));
        }
        self.camera.validate()?;
        self.consistency.validate()?;
        self.cbf.validate()?;
        self.controller_params().validate()?;
        // Checks object geometry, ids and event times.
        let world = World::new(self.objects.clone(), self.events.clone())?;
        for e in world.pending_events() {
            if self.objects.iter().all(|o| o.id != e.object_id) {
                return Err(Error::Scenario(format!(
                    "event at t={} refers to unknown object {}",
                    e.time, e.object_id
                )));
            }
        }
        Ok(())
    }

    /// Controller parameters with the scenario workspace as the state box.
    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams {
            workspace: [self.workspace.min, self.workspace.max],
            ..self.controller.clone()
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}
