use serde::{Deserialize, Serialize};

use super::Observation;
use crate::consistency::GaussianBetaState;
use crate::grid::{lattice_index, VoxelGrid};
use crate::sim::Stationarity;

/// Voxel and association settings of the object map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapParams {
    pub resolution: f64,
    /// TSDF truncation distance `tau`.
    pub truncation: f64,
    pub max_weight: f64,
    /// Association gate on horizontal centroid distance.
    pub association_gate: f64,
    /// Sensor-side extent of each ray update; voxels beyond `truncation` saturate at `+tau`.
    pub free_space_carving: f64,
    /// Top of the mapped height range (the floor is z = 0).
    pub z_max: f64,
    /// Observations with fewer points do not spawn objects.
    pub min_spawn_points: usize,
    /// Matched observations with `|delta|` above this are not fused into the object.
    pub integration_gate: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            truncation: 0.3,
            max_weight: 100.0,
            association_gate: 1.0,
            free_space_carving: 0.6,
            z_max: 1.2,
            min_spawn_points: 20,
            integration_gate: 0.2,
        }
    }
}

impl MapParams {
    pub fn z_levels(&self) -> i64 {
        (self.z_max / self.resolution - 1e-9).ceil() as i64
    }
}

/// One mapped object: pose estimate, labels, consistency belief and TSDF.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRecord {
    pub id: u32,
    /// Running mean of all integrated points.
    pub position: [f64; 3],
    pub heading: f64,
    pub class_id: u32,
    pub stationarity: Stationarity,
    pub consistency: GaussianBetaState,
    pub tsdf: VoxelGrid,
    pub integrated_points: usize,
}

impl ObjectRecord {
    pub fn new(
        id: u32,
        obs: &Observation,
        consistency: GaussianBetaState,
        params: &MapParams,
    ) -> Self {
        let mut rec = Self {
            id,
            position: obs.centroid,
            heading: principal_heading(&obs.points),
            class_id: obs.class_id,
            stationarity: obs.stationarity,
            consistency,
            tsdf: VoxelGrid::empty(params.resolution, params.truncation),
            integrated_points: 0,
        };
        integrate_observation(&mut rec, obs, obs.origin, params);
        rec
    }

    pub fn expected_consistency(&self) -> f64 {
        self.consistency.expected_consistency()
    }
}

/// Orientation of the dominant horizontal axis of a point set.
fn principal_heading(points: &[[f64; 3]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - mx;
        let dy = p[1] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    0.5 * (2.0 * sxy).atan2(sxx - syy)
}

/// Lattice voxels of every trilinear stencil along the segment `a -> b`,
/// sampled at half-voxel spacing, sorted and deduplicated. Covering the
/// stencils (not just the voxels the ray pierces) keeps interpolation at the
/// measured points free of unobserved corners.
pub(crate) fn ray_stencils(a: [f64; 3], b: [f64; 3], res: f64) -> Vec<[i64; 3]> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let steps = (len / (0.5 * res)).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(8 * (steps + 1));
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let base = [0, 1, 2].map(|k| ((a[k] + t * d[k]) / res - 0.5).floor() as i64);
        for corner in 0..8 {
            out.push([base[0] + (corner & 1), base[1] + ((corner >> 1) & 1), base[2] + ((corner >> 2) & 1)]);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Projective TSDF fusion of an observation into its object.
///
/// Each voxel near a sensor ray, from `free_space_carving` in front of the
/// measured point to `truncation` behind it, receives the signed along-ray
/// distance to the point (positive on the sensor side), clamped to `[-tau, tau]`
/// and fused by a weighted running average with unit sample weight.
pub fn integrate_observation(
    obj: &mut ObjectRecord,
    obs: &Observation,
    sensor_origin: [f64; 3],
    params: &MapParams,
) {
    if obs.points.is_empty() {
        return;
    }
    let res = params.resolution;
    let tau = params.truncation;
    let carve = params.free_space_carving.max(tau);
    let pad = (carve / res).ceil() as i64 + 1;
    let z_top = params.z_levels() - 1;

    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for p in &obs.points {
        for a in 0..3 {
            let l = lattice_index(p[a], res);
            lo[a] = lo[a].min(l - pad);
            hi[a] = hi[a].max(l + pad);
        }
    }
    lo[2] = lo[2].clamp(0, z_top);
    hi[2] = hi[2].clamp(0, z_top);
    obj.tsdf.ensure_covers(lo, hi);

    let grid = &mut obj.tsdf;
    for p in &obs.points {
        let d = [p[0] - sensor_origin[0], p[1] - sensor_origin[1], p[2] - sensor_origin[2]];
        let depth = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if depth < 1e-9 {
            continue;
        }
        let dir = d.map(|c| c / depth);
        let t0 = (depth - carve).max(0.0);
        let t1 = depth + tau;
        let a = [0, 1, 2].map(|k| sensor_origin[k] + t0 * dir[k]);
        let b = [0, 1, 2].map(|k| sensor_origin[k] + t1 * dir[k]);
        for l in ray_stencils(a, b, res) {
            if l[2] < 0 || l[2] > z_top {
                continue;
            }
            let Some([i, j, k]) = grid.local(l) else {
                continue;
            };
            let c = l.map(|v| (v as f64 + 0.5) * res);
            let t_c = (c[0] - sensor_origin[0]) * dir[0]
                + (c[1] - sensor_origin[1]) * dir[1]
                + (c[2] - sensor_origin[2]) * dir[2];
            let sdf = depth - t_c;
            if sdf < -tau || sdf > carve {
                continue;
            }
            let sample = sdf.clamp(-tau, tau);
            let idx = grid.linear(i, j, k);
            let w = grid.weights[idx];
            grid.values[idx] = (grid.values[idx] * w + sample) / (w + 1.0);
            grid.weights[idx] = (w + 1.0).min(params.max_weight);
        }
    }

    let n_old = obj.integrated_points as f64;
    let n_new = obs.points.len() as f64;
    for a in 0..3 {
        obj.position[a] = (obj.position[a] * n_old + obs.centroid[a] * n_new) / (n_old + n_new);
    }
    obj.integrated_points += obs.points.len();
}
