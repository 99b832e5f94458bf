use super::{assignment, MapParams, ObjectRecord, Observation};
use crate::consistency::ConsistencyParams;
use crate::error::{Error, Result};

/// Result of matching a frame's observations against the library.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(observation index, object id)`, ascending by observation index.
    pub matches: Vec<(usize, u32)>,
    pub unmatched_observations: Vec<usize>,
    pub unmatched_objects: Vec<u32>,
}

/// Optimal one-to-one assignment under horizontal centroid distance.
///
/// Pairs with different class ids or a distance above `gate` are forbidden.
/// Among assignments of valid pairs, the one with the most matches is chosen,
/// and among those the one with minimum total distance.
pub fn associate_observations(
    observations: &[Observation],
    library: &[ObjectRecord],
    gate: f64,
) -> Association {
    let n = observations.len();
    let m = library.len();
    let mut result = Association::default();
    if n == 0 || m == 0 {
        result.unmatched_observations = (0..n).collect();
        result.unmatched_objects = library.iter().map(|o| o.id).collect();
        return result;
    }
    // Any forbidden pair costs more than every valid assignment combined.
    let forbidden = 1000.0 * (n.max(m) as f64 + 1.0) * gate.max(1.0);
    let cost: Vec<Vec<f64>> = observations
        .iter()
        .map(|obs| {
            library
                .iter()
                .map(|obj| {
                    let d = obs.horizontal_distance(obj.position);
                    if obs.class_id == obj.class_id && d <= gate {
                        d
                    } else {
                        forbidden
                    }
                })
                .collect()
        })
        .collect();
    let assignment = assignment::solve(&cost);
    let mut object_used = vec![false; m];
    for (i, col) in assignment.into_iter().enumerate() {
        match col {
            Some(j) if cost[i][j] < forbidden => {
                object_used[j] = true;
                result.matches.push((i, library[j].id));
            }
            _ => result.unmatched_observations.push(i),
        }
    }
    result.unmatched_objects = library
        .iter()
        .zip(&object_used)
        .filter(|(_, used)| !**used)
        .map(|(o, _)| o.id)
        .collect();
    result
}

/// The object library, kept sorted by id.
#[derive(Debug, Clone, Default)]
pub struct ObjectLibrary {
    objects: Vec<ObjectRecord>,
    next_id: u32,
}

impl ObjectLibrary {
    pub fn new() -> Self {
        Self {
            objects: Vec::new(),
            next_id: 1,
        }
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&ObjectRecord> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn get_mut(&mut self, id: u32) -> Option<&mut ObjectRecord> {
        match self.objects.binary_search_by_key(&id, |o| o.id) {
            Ok(i) => Some(&mut self.objects[i]),
            Err(_) => None,
        }
    }

    /// Creates a record from an unmatched observation, with priors chosen by its stationarity.
    pub fn spawn_object(
        &mut self,
        obs: &Observation,
        consistency: &ConsistencyParams,
        params: &MapParams,
    ) -> Result<u32> {
        if obs.points.is_empty() {
            return Err(Error::InvalidParameter("cannot spawn from an empty observation".into()));
        }
        let id = self.next_id;
        let record = ObjectRecord::new(id, obs, consistency.prior(obs.stationarity), params);
        self.insert(record)?;
        Ok(id)
    }

    /// Inserts a prepared record; its id must be fresh.
    pub fn insert(&mut self, record: ObjectRecord) -> Result<()> {
        match self.objects.binary_search_by_key(&record.id, |o| o.id) {
            Ok(_) => Err(Error::Internal(format!("duplicate object id {}", record.id))),
            Err(pos) => {
                self.next_id = self.next_id.max(record.id + 1);
                self.objects.insert(pos, record);
                Ok(())
            }
        }
    }

    pub fn remove_object(&mut self, id: u32) -> Result<ObjectRecord> {
        match self.objects.binary_search_by_key(&id, |o| o.id) {
            Ok(i) => Ok(self.objects.remove(i)),
            Err(_) => Err(Error::Internal(format!("no object with id {id}"))),
        }
    }
}
