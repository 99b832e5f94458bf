use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior stationarity label of an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stationarity {
    LikelyDynamic,
    LikelyStatic,
}

impl Stationarity {
    /// `s = 1` for likely-static, `s = 0` for likely-dynamic.
    pub fn as_indicator(self) -> f64 {
        match self {
            Stationarity::LikelyStatic => 1.0,
            Stationarity::LikelyDynamic => 0.0,
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, Stationarity::LikelyStatic)
    }
}

/// Ground-supported oriented box obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub id: u32,
    pub center: [f64; 2],
    #[serde(default)]
    pub yaw: f64,
    pub half_extents: [f64; 3],
    pub class_id: u32,
    pub stationarity: Stationarity,
}

impl WorldObject {
    pub fn validate(&self) -> Result<()> {
        if self.half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::Scenario(format!(
                "object {} must have positive half extents",
                self.id
            )));
        }
        if !(self.center[0].is_finite() && self.center[1].is_finite() && self.yaw.is_finite()) {
            return Err(Error::Scenario(format!("object {} has a non-finite pose", self.id)));
        }
        if self.class_id == 0 {
            return Err(Error::Scenario(format!(
                "object {} class_id must be at least 1",
                self.id
            )));
        }
        Ok(())
    }

    /// Maps a world-frame point into the box frame (origin at the footprint center, on the floor).
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        [c * dx + s * dy, -s * dx + c * dy, p[2]]
    }

    fn dir_to_local(&self, d: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]]
    }

    /// Nearest ray parameter `t >= 0` at which the ray enters the box, if any.
    pub fn ray_intersection(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
        let o = self.to_local(origin);
        let d = self.dir_to_local(dir);
        let [hx, hy, hz] = self.half_extents;
        let lo = [-hx, -hy, 0.0];
        let hi = [hx, hy, 2.0 * hz];
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for axis in 0..3 {
            if d[axis].abs() < 1e-15 {
                if o[axis] < lo[axis] || o[axis] > hi[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let mut t0 = (lo[axis] - o[axis]) * inv;
            let mut t1 = (hi[axis] - o[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
        if t_far < 0.0 {
            return None;
        }
        Some(t_near.max(0.0))
    }

    /// Planar distance from `(x, y)` to the box footprint (zero inside).
    pub fn footprint_distance(&self, x: f64, y: f64) -> f64 {
        let l = self.to_local([x, y, 0.0]);
        let dx = (l[0].abs() - self.half_extents[0]).max(0.0);
        let dy = (l[1].abs() - self.half_extents[1]).max(0.0);
        dx.hypot(dy)
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let [hx, hy, _] = self.half_extents;
        let local = [[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]];
        local.map(|[lx, ly]| [self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly])
    }
}

/// What a scripted event does to its object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventAction {
    Teleport {
        center: [f64; 2],
        #[serde(default)]
        yaw: f64,
    },
    Remove,
}

/// Scripted semi-static change applied once its trigger time has passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEvent {
    pub time: f64,
    pub object_id: u32,
    pub action: EventAction,
}

/// Ground-truth world: current objects plus the pending event queue.
#[derive(Debug, Clone)]
pub struct World {
    objects: Vec<WorldObject>,
    events: Vec<SceneEvent>,
    next_event: usize,
}

impl World {
    pub fn new(objects: Vec<WorldObject>, mut events: Vec<SceneEvent>) -> Result<Self> {
        for o in &objects {
            o.validate()?;
        }
        let mut ids: Vec<u32> = objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Scenario("duplicate world object id".into()));
        }
        for e in &events {
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(Error::Scenario(format!(
                    "event for object {} has invalid trigger time {}",
                    e.object_id, e.time
                )));
            }
        }
        // Stable: ties keep their listed order.
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self {
            objects,
            events,
            next_event: 0,
        })
    }

    pub fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    pub fn object(&self, id: u32) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn pending_events(&self) -> &[SceneEvent] {
        &self.events[self.next_event..]
    }

    /// Applies every not-yet-applied event with `time <= t_now`, in order.
    /// Returns the events applied by this call.
    pub fn apply_scene_events(&mut self, t_now: f64) -> Result<Vec<SceneEvent>> {
        let mut applied = Vec::new();
        while let Some(e) = self.events.get(self.next_event) {
            if e.time > t_now {
                break;
            }
            let e = e.clone();
            let idx = self
                .objects
                .iter()
                .position(|o| o.id == e.object_id)
                .ok_or_else(|| {
                    Error::Scenario(format!(
                        "event at t={} refers to unknown object {}",
                        e.time, e.object_id
                    ))
                })?;
            match &e.action {
                EventAction::Teleport { center, yaw } => {
                    self.objects[idx].center = *center;
                    self.objects[idx].yaw = *yaw;
                }
                EventAction::Remove => {
                    self.objects.remove(idx);
                }
            }
            self.next_event += 1;
            applied.push(e);
        }
        Ok(applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(id: u32, cx: f64, cy: f64) -> WorldObject {
        WorldObject {
            id,
            center: [cx, cy],
            yaw: 0.0,
            half_extents: [0.2, 0.2, 0.4],
            class_id: 1,
            stationarity: Stationarity::LikelyStatic,
        }
    }

    #[test]
    fn no_due_events_leave_world_unchanged() {
        let ev = SceneEvent {
            time: 5.0,
            object_id: 3,
            action: EventAction::Remove,
        };
        let mut w = World::new(vec![boxed(3, 1.0, 1.0)], vec![ev]).unwrap();
        assert!(w.apply_scene_events(4.9).unwrap().is_empty());
        assert_eq!(w.objects().len(), 1);
    }

    #[test]
    fn teleport_shifts_center_once() {
        let ev = SceneEvent {
            time: 5.0,
            object_id: 3,
            action: EventAction::Teleport {
                center: [1.5, 1.0],
                yaw: 0.0,
            },
        };
        let mut w = World::new(vec![boxed(3, 1.0, 1.0)], vec![ev]).unwrap();
        assert_eq!(w.apply_scene_events(5.0).unwrap().len(), 1);
        assert!((w.object(3).unwrap().center[0] - 1.5).abs() < 1e-15);
        assert!(w.apply_scene_events(6.0).unwrap().is_empty());
    }

    #[test]
    fn remove_deletes_object() {
        let ev = SceneEvent {
            time: 0.0,
            object_id: 1,
            action: EventAction::Remove,
        };
        let mut w = World::new(vec![boxed(1, 0.0, 0.0), boxed(2, 3.0, 0.0)], vec![ev]).unwrap();
        w.apply_scene_events(0.0).unwrap();
        assert!(w.object(1).is_none());
        assert!(w.object(2).is_some());
    }

    #[test]
    fn unknown_object_is_a_scenario_error() {
        let ev = SceneEvent {
            time: 1.0,
            object_id: 9,
            action: EventAction::Remove,
        };
        let mut w = World::new(vec![boxed(1, 0.0, 0.0)], vec![ev]).unwrap();
        assert!(matches!(w.apply_scene_events(2.0), Err(Error::Scenario(_))));
    }

    #[test]
    fn negative_trigger_time_rejected() {
        let ev = SceneEvent {
            time: -1.0,
            object_id: 1,
            action: EventAction::Remove,
        };
        assert!(World::new(vec![boxed(1, 0.0, 0.0)], vec![ev]).is_err());
    }

    #[test]
    fn same_time_distinct_objects_commute() {
        let e1 = SceneEvent {
            time: 1.0,
            object_id: 1,
            action: EventAction::Teleport { center: [5.0, 5.0], yaw: 0.0 },
        };
        let e2 = SceneEvent {
            time: 1.0,
            object_id: 2,
            action: EventAction::Remove,
        };
        let objs = vec![boxed(1, 0.0, 0.0), boxed(2, 3.0, 0.0)];
        let mut a = World::new(objs.clone(), vec![e1.clone(), e2.clone()]).unwrap();
        let mut b = World::new(objs, vec![e2, e1]).unwrap();
        a.apply_scene_events(1.0).unwrap();
        b.apply_scene_events(1.0).unwrap();
        assert_eq!(a.objects(), b.objects());
    }

    #[test]
    fn ties_on_same_object_apply_in_listed_order() {
        let first = SceneEvent {
            time: 2.0,
            object_id: 1,
            action: EventAction::Teleport { center: [1.0, 0.0], yaw: 0.0 },
        };
        let second = SceneEvent {
            time: 2.0,
            object_id: 1,
            action: EventAction::Teleport { center: [2.0, 0.0], yaw: 0.0 },
        };
        let mut w = World::new(vec![boxed(1, 0.0, 0.0)], vec![first, second]).unwrap();
        w.apply_scene_events(2.0).unwrap();
        assert_eq!(w.object(1).unwrap().center, [2.0, 0.0]);
    }

    #[test]
    fn ray_hits_axis_aligned_box_face() {
        let b = WorldObject {
            id: 1,
            center: [3.0, 0.0],
            yaw: 0.0,
            half_extents: [0.5, 1.0, 0.5],
            class_id: 1,
            stationarity: Stationarity::LikelyStatic,
        };
        let t = b.ray_intersection([0.0, 0.0, 0.3], [1.0, 0.0, 0.0]).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        assert!(b.ray_intersection([0.0, 0.0, 0.3], [-1.0, 0.0, 0.0]).is_none());
        // Above the box top.
        assert!(b.ray_intersection([0.0, 0.0, 1.5], [1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn footprint_distance_of_rotated_box() {
        let b = WorldObject {
            id: 1,
            center: [0.0, 0.0],
            yaw: std::f64::consts::FRAC_PI_2,
            half_extents: [1.0, 0.25, 0.5],
            class_id: 1,
            stationarity: Stationarity::LikelyStatic,
        };
        // Long axis now along y.
        assert!((b.footprint_distance(1.25, 0.0) - 1.0).abs() < 1e-12);
        assert!(b.footprint_distance(0.0, 0.9) < 1e-12);
    }
}
