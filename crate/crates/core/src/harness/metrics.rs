use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pipeline::RunRecord;
use crate::qp::SolveStatus;

/// Summary of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub mode: String,
    pub gamma_bar: f64,
    pub ticks: usize,
    pub goal_reached: bool,
    /// Absent when the goal was not reached.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_time: Option<f64>,
    pub path_length: f64,
    /// Minimum of `h` at the true pose over all ticks.
    pub min_h: f64,
    pub ticks_h_negative: usize,
    /// Minimum footprint distance to any ground-truth object.
    pub min_clearance: f64,
    /// Closest approach per ground-truth object id.
    pub closest_approach: BTreeMap<String, f64>,
    /// Extrema of `E[v]` per mapped object id.
    pub ev_min: BTreeMap<String, f64>,
    pub ev_max: BTreeMap<String, f64>,
    pub removals: usize,
    pub spawns: usize,
    pub degraded_ticks: usize,
    pub max_slack: f64,
    pub max_kkt_residual: f64,
    pub mean_solve_ms: f64,
    pub mean_tick_ms: f64,
}

pub fn compute_metrics(record: &RunRecord) -> Metrics {
    let rows = &record.rows;
    let mut path_length = 0.0;
    for w in rows.windows(2) {
        path_length += w[0].true_pose.distance_to(&w[1].true_pose);
    }
    if let Some(last) = rows.last() {
        path_length += last.true_pose.distance_to(&record.final_pose);
    }
    let mut closest: BTreeMap<String, f64> = BTreeMap::new();
    let mut ev_min: BTreeMap<String, f64> = BTreeMap::new();
    let mut ev_max: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows {
        for (id, d) in &r.obstacle_distances {
            let e = closest.entry(id.to_string()).or_insert(f64::INFINITY);
            *e = e.min(*d);
        }
        for o in &r.objects {
            let lo = ev_min.entry(o.id.to_string()).or_insert(f64::INFINITY);
            *lo = lo.min(o.expected_consistency);
            let hi = ev_max.entry(o.id.to_string()).or_insert(f64::NEG_INFINITY);
            *hi = hi.max(o.expected_consistency);
        }
    }
    let n = rows.len().max(1) as f64;
    Metrics {
        scenario: record.scenario.clone(),
        mode: record.mode.to_string(),
        gamma_bar: record.gamma_bar,
        ticks: rows.len(),
        goal_reached: record.goal_reached,
        goal_time: record.goal_time,
        path_length,
        min_h: rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min),
        ticks_h_negative: rows.iter().filter(|r| r.h < 0.0).count(),
        min_clearance: closest.values().copied().fold(f64::INFINITY, f64::min),
        closest_approach: closest,
        ev_min,
        ev_max,
        removals: rows.iter().map(|r| r.removed.len()).sum(),
        spawns: rows.iter().map(|r| r.spawned.len()).sum(),
        degraded_ticks: rows.iter().filter(|r| r.status == SolveStatus::Degraded).count(),
        max_slack: rows.iter().map(|r| r.max_slack).fold(0.0, f64::max),
        max_kkt_residual: rows.iter().map(|r| r.kkt_residual).fold(0.0, f64::max),
        mean_solve_ms: 1e3 * record.timings.iter().map(|t| t.solve_seconds).sum::<f64>() / n,
        mean_tick_ms: 1e3 * record.timings.iter().map(|t| t.tick_seconds).sum::<f64>() / n,
    }
}

impl Metrics {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics serialize to TOML")
    }
}
