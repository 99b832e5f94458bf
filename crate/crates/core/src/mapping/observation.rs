use std::collections::BTreeMap;

use crate::sim::{SemanticPointCloud, Stationarity};

/// Points of one semantic instance in a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub instance_id: u32,
    pub class_id: u32,
    pub stationarity: Stationarity,
    pub points: Vec<[f64; 3]>,
    pub centroid: [f64; 3],
    /// Sensor origin the points were measured from.
    pub origin: [f64; 3],
}

impl Observation {
    pub fn horizontal_distance(&self, p: [f64; 3]) -> f64 {
        (self.centroid[0] - p[0]).hypot(self.centroid[1] - p[1])
    }
}

fn mean(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    c.map(|v| v / n)
}

/// Groups a labeled cloud by instance id, in ascending id order.
pub fn segment_observations(cloud: &SemanticPointCloud) -> Vec<Observation> {
    let mut groups: BTreeMap<u32, Observation> = BTreeMap::new();
    for p in &cloud.points {
        groups
            .entry(p.instance_id)
            .or_insert_with(|| Observation {
                instance_id: p.instance_id,
                class_id: p.class_id,
                stationarity: p.stationarity,
                points: Vec::new(),
                centroid: [0.0; 3],
                origin: cloud.origin,
            })
            .points
            .push(p.point);
    }
    groups
        .into_values()
        .map(|mut o| {
            o.centroid = mean(&o.points);
            o
        })
        .collect()
}
