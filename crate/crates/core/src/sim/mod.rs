//! Ground-truth world, scripted changes, depth sensing and pose estimation stand-in.

mod camera;
mod world;

pub use camera::{render_depth, DepthCamera, SemanticPoint, SemanticPointCloud};
pub use world::{EventAction, SceneEvent, Stationarity, World, WorldObject};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::state::{wrap_angle, RobotState};

pub use crate::state::step_dynamics;

/// Perturbs the true pose by zero-mean Gaussian noise (`sigma_xy` per position axis, `sigma_theta` on heading).
pub fn estimate_pose(
    true_pose: &RobotState,
    sigma_xy: f64,
    sigma_theta: f64,
    rng_seed: u64,
) -> Result<RobotState> {
    if !(sigma_xy >= 0.0 && sigma_theta >= 0.0) {
        return Err(Error::InvalidParameter("pose noise sigmas must be non-negative".into()));
    }
    if sigma_xy == 0.0 && sigma_theta == 0.0 {
        return Ok(*true_pose);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let (ex, ey, et) = (n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
    Ok(RobotState::new(
        true_pose.x + sigma_xy * ex,
        true_pose.y + sigma_xy * ey,
        wrap_angle(true_pose.theta + sigma_theta * et),
    ))
}
