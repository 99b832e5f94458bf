use std::collections::BTreeSet;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Mode, Scenario};
use crate::cbf::{
    build_cbf_field, build_nonsemantic_edf, build_semantic_edf, extract_labeled_boundary,
    project_2p5d, CbfField,
};
use crate::consistency::{compute_delta, update_consistency};
use crate::error::Result;
use crate::grid::GridSpec;
use crate::mapping::{
    associate_observations, fuse_global_tsdf, integrate_observation, segment_observations,
    GlobalTsdf, ObjectLibrary, Observation,
};
use crate::mpc::{controller_step, BarrierConstraint, ControllerParams, PredictedTrajectory};
use crate::qp::SolveStatus;
use crate::sim::{estimate_pose, render_depth, step_dynamics, Stationarity, World, WorldObject};
use crate::state::{ControlInput, RobotState};

/// Belief of one mapped object at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectBelief {
    pub id: u32,
    pub expected_consistency: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRow {
    pub tick: usize,
    pub t: f64,
    pub true_pose: RobotState,
    pub estimated_pose: RobotState,
    pub input: ControlInput,
    /// Barrier value at the true pose.
    pub h: f64,
    /// Mapped objects after this tick's update, ascending by id.
    pub objects: Vec<ObjectBelief>,
    pub status: SolveStatus,
    pub max_slack: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Footprint distance from the true position to each ground-truth object.
    pub obstacle_distances: Vec<(u32, f64)>,
    pub events_applied: usize,
    pub removed: Vec<u32>,
    pub spawned: Vec<u32>,
}

/// Wall-clock timings of one tick; kept apart from the deterministic rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TickTiming {
    pub solve_seconds: f64,
    pub tick_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub mode: Mode,
    pub gamma_bar: f64,
    pub dt: f64,
    pub goal: RobotState,
    pub goal_tolerance: f64,
    pub rows: Vec<TickRow>,
    pub timings: Vec<TickTiming>,
    pub final_pose: RobotState,
    pub goal_reached: bool,
    /// Simulation time at which the goal tolerance was first met.
    pub goal_time: Option<f64>,
    pub initial_world: Vec<WorldObject>,
    pub final_world: Vec<WorldObject>,
    pub final_field: CbfField,
    pub field_snapshots: Vec<(usize, CbfField)>,
    pub tsdf_snapshots: Vec<(usize, GlobalTsdf)>,
}

impl RunRecord {
    /// Every object id that existed in the library at some tick, ascending.
    pub fn object_ids(&self) -> Vec<u32> {
        let ids: BTreeSet<u32> = self.rows.iter().flat_map(|r| r.objects.iter().map(|o| o.id)).collect();
        ids.into_iter().collect()
    }
}

/// Perception, mapping and barrier products of one tick.
#[derive(Debug, Clone)]
pub struct Perception {
    pub observations: Vec<Observation>,
    pub removed: Vec<u32>,
    pub spawned: Vec<u32>,
    pub global: GlobalTsdf,
    pub field: CbfField,
}

/// Closed-loop state of a scenario; advanced one control tick at a time.
pub struct Simulation {
    scenario: Scenario,
    controller: ControllerParams,
    world: World,
    library: ObjectLibrary,
    workspace: GridSpec,
    rng: ChaCha8Rng,
    pose: RobotState,
    plan: Option<PredictedTrajectory>,
    tick: usize,
    max_ticks: usize,
    goal_time: Option<f64>,
    field: CbfField,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let world = World::new(scenario.objects.clone(), scenario.events.clone())?;
        let controller = scenario.controller_params();
        let workspace = GridSpec::covering(scenario.workspace.min, scenario.workspace.max, scenario.map.resolution);
        let max_ticks = (scenario.duration / controller.dt - 1e-9).ceil() as usize;
        Ok(Self {
            field: CbfField::uniform(workspace, &scenario.cbf),
            scenario: scenario.clone(),
            controller,
            world,
            library: ObjectLibrary::new(),
            workspace,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            pose: scenario.robot.start,
            plan: None,
            tick: 0,
            max_ticks,
            goal_time: None,
        })
    }

    pub fn pose(&self) -> RobotState {
        self.pose
    }

    pub fn library(&self) -> &ObjectLibrary {
        &self.library
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn field(&self) -> &CbfField {
        &self.field
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.controller.dt
    }

    pub fn goal_time(&self) -> Option<f64> {
        self.goal_time
    }

    /// True once the goal is reached or the duration has elapsed.
    pub fn finished(&mut self) -> bool {
        if self.goal_time.is_none()
            && self.pose.distance_to(&self.scenario.robot.goal) <= self.scenario.goal_tolerance
        {
            self.goal_time = Some(self.time());
        }
        self.goal_time.is_some() || self.tick >= self.max_ticks
    }

    /// Sense, update the object library and rebuild the barrier from `estimated`.
    fn perceive(&mut self, estimated: &RobotState, render_seed: u64) -> Result<Perception> {
        let sc = &self.scenario;
        let cloud = render_depth(self.world.objects(), &self.pose, &sc.camera, render_seed)?
            .reframed(&self.pose, estimated);
        let observations = segment_observations(&cloud);
        let assoc = associate_observations(&observations, self.library.objects(), sc.map.association_gate);

        let mut respawn = Vec::new();
        for &(i, id) in &assoc.matches {
            let obs = &observations[i];
            let obj = self.library.get_mut(id).expect("matched object exists");
            match compute_delta(obj, obs) {
                Some(delta) => {
                    let upd = update_consistency(&obj.consistency, delta, obj.stationarity, &sc.consistency)?;
                    obj.consistency = upd.state;
                    if delta.abs() <= sc.map.integration_gate {
                        integrate_observation(obj, obs, obs.origin, &sc.map);
                    }
                }
                None => integrate_observation(obj, obs, obs.origin, &sc.map),
            }
            if obj.expected_consistency() < sc.consistency.removal_threshold {
                respawn.push((i, id));
            }
        }
        let mut removed = Vec::new();
        let mut spawned = Vec::new();
        for &(i, id) in &respawn {
            self.library.remove_object(id)?;
            removed.push(id);
            if observations[i].points.len() >= sc.map.min_spawn_points {
                spawned.push(self.library.spawn_object(&observations[i], &sc.consistency, &sc.map)?);
            }
        }
        for &i in &assoc.unmatched_observations {
            if observations[i].points.len() >= sc.map.min_spawn_points {
                spawned.push(self.library.spawn_object(&observations[i], &sc.consistency, &sc.map)?);
            }
        }

        let global = fuse_global_tsdf(self.library.objects(), self.workspace, &sc.map);
        let m25 = project_2p5d(&global, sc.cbf.theta_z);
        let mut boundary = extract_labeled_boundary(&m25, sc.cbf.theta_zero, &self.library);
        if sc.pin_labels {
            boundary.relabel(1.0 / sc.cbf.lambda_c, Stationarity::LikelyStatic);
        }
        let edf = match sc.mode {
            Mode::SemanticMpcCbf => build_semantic_edf(&boundary, &sc.cbf),
            Mode::NonsemanticMpcCbf | Mode::ClassicMpc => build_nonsemantic_edf(&boundary, &sc.cbf),
        };
        let field = build_cbf_field(edf, &sc.cbf, self.time());
        Ok(Perception {
            observations,
            removed,
            spawned,
            global,
            field,
        })
    }

    /// Runs one control tick. Returns `None` when the run is already finished.
    pub fn step(&mut self) -> Result<Option<(TickRow, TickTiming, Perception)>> {
        if self.finished() {
            return Ok(None);
        }
        let started = Instant::now();
        let t = self.time();
        let events_applied = self.world.apply_scene_events(t)?.len();
        let render_seed = self.rng.next_u64();
        let pose_seed = self.rng.next_u64();
        let noise = self.scenario.pose_noise;
        let estimated = estimate_pose(&self.pose, noise.sigma_xy, noise.sigma_theta, pose_seed)?;

        let perception = self.perceive(&estimated, render_seed)?;
        self.field = perception.field.clone();

        let barrier = match self.scenario.mode {
            Mode::ClassicMpc => BarrierConstraint::HardState,
            _ => BarrierConstraint::DiscreteCbf,
        };
        let prev = self
            .plan
            .take()
            .unwrap_or_else(|| PredictedTrajectory::hold(estimated, self.controller.horizon));
        let solve_started = Instant::now();
        let out = controller_step(&self.controller, &estimated, &prev, &self.field, &self.scenario.robot.goal, barrier)?;
        let solve_seconds = solve_started.elapsed().as_secs_f64();

        let (h, _) = self.field.query_h(self.pose.x, self.pose.y)?;
        let objects = self
            .library
            .objects()
            .iter()
            .map(|o| ObjectBelief {
                id: o.id,
                expected_consistency: o.expected_consistency(),
                mu: o.consistency.mu,
                sigma: o.consistency.sigma,
            })
            .collect();
        let obstacle_distances = self
            .world
            .objects()
            .iter()
            .map(|o| (o.id, o.footprint_distance(self.pose.x, self.pose.y)))
            .collect();
        let row = TickRow {
            tick: self.tick,
            t,
            true_pose: self.pose,
            estimated_pose: estimated,
            input: out.input,
            h,
            objects,
            status: out.report.status,
            max_slack: out.report.max_slack,
            iterations: out.report.iterations,
            kkt_residual: out.report.residuals.max(),
            obstacle_distances,
            events_applied,
            removed: perception.removed.clone(),
            spawned: perception.spawned.clone(),
        };

        self.pose = step_dynamics(self.pose, out.input, self.controller.dt)?;
        self.plan = Some(out.trajectory);
        self.tick += 1;
        let timing = TickTiming {
            solve_seconds,
            tick_seconds: started.elapsed().as_secs_f64(),
        };
        Ok(Some((row, timing, perception)))
    }
}

/// Runs the scenario to the goal or the end of its duration.
pub fn run_closed_loop(scenario: &Scenario) -> Result<RunRecord> {
    let mut sim = Simulation::new(scenario)?;
    let initial_world = sim.world().objects().to_vec();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut field_snapshots = Vec::new();
    let mut tsdf_snapshots = Vec::new();
    while let Some((row, timing, perception)) = sim.step()? {
        if scenario.outputs.field_snapshot_ticks.contains(&row.tick) {
            field_snapshots.push((row.tick, perception.field.clone()));
        }
        if scenario.outputs.tsdf_snapshot_ticks.contains(&row.tick) {
            tsdf_snapshots.push((row.tick, perception.global));
        }
        rows.push(row);
        timings.push(timing);
    }
    Ok(RunRecord {
        scenario: scenario.name.clone(),
        mode: scenario.mode,
        gamma_bar: scenario.controller.gamma_bar,
        dt: scenario.controller.dt,
        goal: scenario.robot.goal,
        goal_tolerance: scenario.goal_tolerance,
        rows,
        timings,
        final_pose: sim.pose(),
        goal_reached: sim.goal_time().is_some(),
        goal_time: sim.goal_time(),
        initial_world,
        final_world: sim.world().objects().to_vec(),
        final_field: sim.field().clone(),
        field_snapshots,
        tsdf_snapshots,
    })
}
