use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{Stationarity, WorldObject};
use crate::error::{Error, Result};
use crate::state::RobotState;

/// Horizontal fan of depth rays with a few vertical levels, mounted on the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepthCamera {
    pub horizontal_fov: f64,
    pub rays_per_scan: usize,
    pub vertical_levels: usize,
    /// Total vertical spread of the levels.
    pub vertical_fov: f64,
    pub max_range: f64,
    pub depth_noise_sigma: f64,
    pub mount_height: f64,
}

impl Default for DepthCamera {
    fn default() -> Self {
        Self {
            horizontal_fov: 87f64.to_radians(),
            rays_per_scan: 160,
            vertical_levels: 5,
            vertical_fov: 30f64.to_radians(),
            max_range: 5.0,
            depth_noise_sigma: 0.01,
            mount_height: 0.3,
        }
    }
}

impl DepthCamera {
    pub fn validate(&self) -> Result<()> {
        if self.rays_per_scan < 2 {
            return Err(Error::InvalidParameter("rays_per_scan must be at least 2".into()));
        }
        if self.vertical_levels < 1 {
            return Err(Error::InvalidParameter("vertical_levels must be at least 1".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidParameter("max_range must be positive".into()));
        }
        if !(self.depth_noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("depth_noise_sigma must be non-negative".into()));
        }
        if !(self.horizontal_fov > 0.0 && self.vertical_fov >= 0.0) {
            return Err(Error::InvalidParameter("field of view must be positive".into()));
        }
        Ok(())
    }

    /// Camera center in the world frame for a robot pose.
    pub fn origin(&self, pose: &RobotState) -> [f64; 3] {
        [pose.x, pose.y, self.mount_height]
    }

    /// Unit ray directions in the world frame, level-major then left-to-right.
    pub fn ray_directions(&self, pose: &RobotState) -> Vec<[f64; 3]> {
        let mut dirs = Vec::with_capacity(self.rays_per_scan * self.vertical_levels);
        for level in 0..self.vertical_levels {
            let elevation = if self.vertical_levels == 1 {
                0.0
            } else {
                -0.5 * self.vertical_fov
                    + self.vertical_fov * level as f64 / (self.vertical_levels - 1) as f64
            };
            let (se, ce) = elevation.sin_cos();
            for i in 0..self.rays_per_scan {
                let yaw = pose.theta - 0.5 * self.horizontal_fov
                    + self.horizontal_fov * i as f64 / (self.rays_per_scan - 1) as f64;
                let (sy, cy) = yaw.sin_cos();
                dirs.push([ce * cy, ce * sy, se]);
            }
        }
        dirs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticPoint {
    pub point: [f64; 3],
    pub instance_id: u32,
    pub class_id: u32,
    pub stationarity: Stationarity,
}

/// Labeled depth returns in the world frame, with the sensor origin they were taken from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticPointCloud {
    pub origin: [f64; 3],
    pub points: Vec<SemanticPoint>,
}

impl SemanticPointCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Re-expresses a cloud rendered at `true_pose` as the robot perceives it from `estimated`.
    pub fn reframed(&self, true_pose: &RobotState, estimated: &RobotState) -> SemanticPointCloud {
        let dtheta = estimated.theta - true_pose.theta;
        let (s, c) = dtheta.sin_cos();
        let map = |p: [f64; 3]| {
            let dx = p[0] - true_pose.x;
            let dy = p[1] - true_pose.y;
            [estimated.x + c * dx - s * dy, estimated.y + s * dx + c * dy, p[2]]
        };
        SemanticPointCloud {
            origin: map(self.origin),
            points: self
                .points
                .iter()
                .map(|p| SemanticPoint {
                    point: map(p.point),
                    ..*p
                })
                .collect(),
        }
    }
}

/// Nearest hit of one ray against the world, ignoring anything beyond the floor.
pub(crate) fn cast_ray(
    world: &[WorldObject],
    origin: [f64; 3],
    dir: [f64; 3],
    max_range: f64,
) -> Option<(f64, usize)> {
    let floor = if dir[2] < 0.0 {
        -origin[2] / dir[2]
    } else {
        f64::INFINITY
    };
    let mut best: Option<(f64, usize)> = None;
    for (idx, obj) in world.iter().enumerate() {
        if let Some(t) = obj.ray_intersection(origin, dir) {
            if t <= max_range && t < floor && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, idx));
            }
        }
    }
    best
}

/// Ray-casts the camera against the world boxes and returns labeled points.
pub fn render_depth(
    world: &[WorldObject],
    pose: &RobotState,
    camera: &DepthCamera,
    rng_seed: u64,
) -> Result<SemanticPointCloud> {
    camera.validate()?;
    if !pose.is_finite() {
        return Err(Error::NonFinite("camera pose"));
    }
    let origin = camera.origin(pose);
    let mut cloud = SemanticPointCloud {
        origin,
        points: Vec::new(),
    };
    if world.is_empty() {
        return Ok(cloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, camera.depth_noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    for dir in camera.ray_directions(pose) {
        let Some((t, idx)) = cast_ray(world, origin, dir, camera.max_range) else {
            continue;
        };
        let depth = if camera.depth_noise_sigma > 0.0 {
            t + noise.sample(&mut rng)
        } else {
            t
        };
        if !(depth > 0.0 && depth <= camera.max_range) {
            continue;
        }
        let obj = &world[idx];
        cloud.points.push(SemanticPoint {
            point: [
                origin[0] + depth * dir[0],
                origin[1] + depth * dir[1],
                origin[2] + depth * dir[2],
            ],
            instance_id: obj.id,
            class_id: obj.class_id,
            stationarity: obj.stationarity,
        });
    }
    Ok(cloud)
}
