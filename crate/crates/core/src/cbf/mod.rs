//! Object-aware control barrier function over the 2.5D projection of the scene TSDF.
//!
//! Boundary cells carry their owner's consistency and stationarity. Each
//! object's distance cone is scaled by `lambda_c * E[v]` and lowered by
//! `b` (static) or `lambda_s * b` (dynamic); the lower envelope, capped at
//! `theta_cutoff`, is the barrier `h`.

mod edt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use edt::distance_transform;

use crate::error::{Error, Result};
use crate::grid::{Grid2, GridSpec};
use crate::mapping::{GlobalTsdf, ObjectLibrary};
use crate::sim::Stationarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbfParams {
    /// Top of the height window folded into the 2.5D map.
    pub theta_z: f64,
    /// Cells whose projected magnitude is at most this form the boundary.
    pub theta_zero: f64,
    pub theta_cutoff: f64,
    /// Bias subtracted from scaled distances.
    pub b: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
}

impl Default for CbfParams {
    fn default() -> Self {
        Self {
            theta_z: 1.0,
            theta_zero: 0.15,
            theta_cutoff: 1.8,
            b: 0.75,
            lambda_c: 3.0,
            lambda_s: 2.0,
        }
    }
}

impl CbfParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("theta_z", self.theta_z),
            ("theta_zero", self.theta_zero),
            ("theta_cutoff", self.theta_cutoff),
            ("b", self.b),
            ("lambda_c", self.lambda_c),
            ("lambda_s", self.lambda_s),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("cbf.{name} must be positive, got {v}")));
            }
        }
        if self.lambda_s <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "cbf.lambda_s must exceed 1, got {}",
                self.lambda_s
            )));
        }
        Ok(())
    }

    /// Bias of an object with the given stationarity.
    pub fn bias(&self, stationarity: Stationarity) -> f64 {
        let s = stationarity.as_indicator();
        (self.lambda_s * (1.0 - s) + s) * self.b
    }
}

/// 2.5D map: minimum `|tsdf|` over the height window, with the object attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub grid: Grid2,
    pub owner: Vec<Option<u32>>,
}

/// Folds voxel layers with centers in `(0, theta_z]` into a 2D map.
///
/// Columns without any observed voxel keep `+tau` and have no owner.
pub fn project_2p5d(global: &GlobalTsdf, theta_z: f64) -> Projection {
    let g = &global.grid;
    let spec = GridSpec {
        resolution: g.resolution,
        offset: [g.offset[0], g.offset[1]],
        dims: [g.dims[0], g.dims[1]],
    };
    let mut grid = Grid2::filled(spec, global.truncation);
    let mut owner = vec![None; spec.cell_count()];
    let layers: Vec<usize> = (0..g.dims[2])
        .filter(|k| {
            let z = (g.offset[2] + *k as i64) as f64 * g.resolution + 0.5 * g.resolution;
            z > 0.0 && z <= theta_z
        })
        .collect();
    for j in 0..g.dims[1] {
        for i in 0..g.dims[0] {
            let cell = grid.index(i, j);
            let mut best = global.truncation;
            let mut who = None;
            for &k in &layers {
                let idx = g.linear(i, j, k);
                if g.weights[idx] <= 0.0 {
                    continue;
                }
                let v = g.values[idx].abs();
                if v < best || who.is_none() && v <= best {
                    best = v;
                    who = global.owner[idx];
                }
            }
            grid.values[cell] = best;
            owner[cell] = who;
        }
    }
    Projection { grid, owner }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCell {
    pub cell: [usize; 2],
    pub position: [f64; 2],
    pub owner: u32,
    pub expected_consistency: f64,
    pub stationarity: Stationarity,
}

/// Zero-level set of the 2.5D map, each cell labeled with its owner's semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBoundary {
    pub spec: GridSpec,
    pub cells: Vec<BoundaryCell>,
}

impl LabeledBoundary {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Overrides every cell's labels; used to pin the semantic field to the baseline.
    pub fn relabel(&mut self, expected_consistency: f64, stationarity: Stationarity) {
        for c in &mut self.cells {
            c.expected_consistency = expected_consistency;
            c.stationarity = stationarity;
        }
    }
}

/// Boundary cells labeled from the object library. Cells whose owner is no
/// longer in the library are dropped.
pub fn extract_labeled_boundary(
    m25: &Projection,
    theta_zero: f64,
    library: &ObjectLibrary,
) -> LabeledBoundary {
    extract_boundary_with(m25, theta_zero, |id| {
        library
            .get(id)
            .map(|o| (o.expected_consistency(), o.stationarity))
    })
}

/// Like [`extract_labeled_boundary`] with an arbitrary label source.
pub fn extract_boundary_with(
    m25: &Projection,
    theta_zero: f64,
    labels: impl Fn(u32) -> Option<(f64, Stationarity)>,
) -> LabeledBoundary {
    let g = &m25.grid;
    let mut cells = Vec::new();
    for iy in 0..g.dims[1] {
        for ix in 0..g.dims[0] {
            let idx = g.index(ix, iy);
            if g.values[idx] > theta_zero {
                continue;
            }
            let Some(owner) = m25.owner[idx] else { continue };
            let Some((ev, s)) = labels(owner) else { continue };
            cells.push(BoundaryCell {
                cell: [ix, iy],
                position: g.center(ix, iy),
                owner,
                expected_consistency: ev,
                stationarity: s,
            });
        }
    }
    LabeledBoundary {
        spec: g.spec(),
        cells,
    }
}

/// Distance in meters from every cell of `spec` to the nearest of `cells`.
fn distances(spec: &GridSpec, cells: impl Iterator<Item = [usize; 2]>) -> Option<Vec<f64>> {
    let [nx, ny] = spec.dims;
    let mut sites = vec![false; nx * ny];
    for [ix, iy] in cells {
        sites[iy * nx + ix] = true;
    }
    let mut d = distance_transform(&sites, nx, ny)?;
    for v in &mut d {
        *v *= spec.resolution;
    }
    Some(d)
}

/// Object-aware EDF: per object, `lambda_c * E[v] * dist - bias`, then the
/// pointwise minimum over objects. Uncapped; infinite when the boundary is empty.
pub fn build_semantic_edf(boundary: &LabeledBoundary, params: &CbfParams) -> Grid2 {
    let spec = boundary.spec;
    let mut edf = Grid2::filled(spec, f64::INFINITY);
    let mut groups: BTreeMap<u32, (f64, Stationarity, Vec<[usize; 2]>)> = BTreeMap::new();
    for c in &boundary.cells {
        groups
            .entry(c.owner)
            .or_insert_with(|| (c.expected_consistency, c.stationarity, Vec::new()))
            .2
            .push(c.cell);
    }
    for (ev, s, cells) in groups.into_values() {
        let Some(d) = distances(&spec, cells.into_iter()) else { continue };
        let slope = params.lambda_c * ev;
        let bias = params.bias(s);
        for (out, di) in edf.values.iter_mut().zip(d) {
            let v = slope * di - bias;
            if v < *out {
                *out = v;
            }
        }
    }
    edf
}

/// Baseline EDF without semantics: plain distance to the boundary minus `b`.
pub fn build_nonsemantic_edf(boundary: &LabeledBoundary, params: &CbfParams) -> Grid2 {
    let spec = boundary.spec;
    match distances(&spec, boundary.cells.iter().map(|c| c.cell)) {
        None => Grid2::filled(spec, f64::INFINITY),
        Some(d) => Grid2 {
            resolution: spec.resolution,
            offset: spec.offset,
            dims: spec.dims,
            values: d.into_iter().map(|v| v - params.b).collect(),
        },
    }
}

/// Barrier `h` on a 2D grid; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfField {
    pub grid: Grid2,
    pub params: CbfParams,
    /// Simulation time of the map the field was built from.
    pub built_at: f64,
}

/// Caps an EDF at `theta_cutoff`.
pub fn build_cbf_field(mut edf: Grid2, params: &CbfParams, built_at: f64) -> CbfField {
    for v in &mut edf.values {
        *v = v.min(params.theta_cutoff);
    }
    CbfField {
        grid: edf,
        params: *params,
        built_at,
    }
}

impl CbfField {
    /// Field equal to `theta_cutoff` everywhere.
    pub fn uniform(spec: GridSpec, params: &CbfParams) -> Self {
        Self {
            grid: Grid2::filled(spec, params.theta_cutoff),
            params: *params,
            built_at: 0.0,
        }
    }

    /// Interpolated `h`; the flag is set when the query was clamped to the extent.
    pub fn query_h(&self, x: f64, y: f64) -> Result<(f64, bool)> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("field query position"));
        }
        Ok(self.grid.bilinear(x, y))
    }

    /// Central difference of the interpolated field with step `resolution / 2`.
    pub fn query_grad(&self, x: f64, y: f64) -> Result<([f64; 2], bool)> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("field query position"));
        }
        let s = 0.5 * self.grid.resolution;
        let (xp, c1) = self.grid.bilinear(x + s, y);
        let (xm, c2) = self.grid.bilinear(x - s, y);
        let (yp, c3) = self.grid.bilinear(x, y + s);
        let (ym, c4) = self.grid.bilinear(x, y - s);
        let (_, c0) = self.grid.bilinear(x, y);
        Ok(([(xp - xm) / (2.0 * s), (yp - ym) / (2.0 * s)], c0 || c1 || c2 || c3 || c4))
    }
}
