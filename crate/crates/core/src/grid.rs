//! Dense voxel and cell grids on a world-anchored lattice.
//!
//! Every grid shares the lattice whose cell `i` along an axis spans
//! `[i * res, (i + 1) * res)`, so grids of equal resolution index each
//! other without resampling.

use serde::{Deserialize, Serialize};

/// Lattice index of the cell containing coordinate `c`.
pub fn lattice_index(c: f64, res: f64) -> i64 {
    (c / res).floor() as i64
}

/// 3D grid with per-voxel fusion weights (zero weight means unobserved).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub resolution: f64,
    /// Lattice index of voxel `(0, 0, 0)`.
    pub offset: [i64; 3],
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Value reported for unobserved voxels.
    pub default_value: f64,
}

impl VoxelGrid {
    pub fn new(resolution: f64, offset: [i64; 3], dims: [usize; 3], default_value: f64) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            resolution,
            offset,
            dims,
            values: vec![default_value; n],
            weights: vec![0.0; n],
            default_value,
        }
    }

    pub fn empty(resolution: f64, default_value: f64) -> Self {
        Self::new(resolution, [0; 3], [0; 3], default_value)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// World coordinates of the grid's minimum corner.
    pub fn origin(&self) -> [f64; 3] {
        self.offset.map(|o| o as f64 * self.resolution)
    }

    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Local index of a lattice voxel, if inside the grid.
    pub fn local(&self, lattice: [i64; 3]) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let l = lattice[a] - self.offset[a];
            if l < 0 || l >= self.dims[a] as i64 {
                return None;
            }
            out[a] = l as usize;
        }
        Some(out)
    }

    pub fn lattice_of_point(&self, p: [f64; 3]) -> [i64; 3] {
        p.map(|c| lattice_index(c, self.resolution))
    }

    /// World coordinates of the center of lattice voxel `l`.
    pub fn lattice_center(&self, l: [i64; 3]) -> [f64; 3] {
        l.map(|c| (c as f64 + 0.5) * self.resolution)
    }

    pub fn get_lattice(&self, l: [i64; 3]) -> Option<(f64, f64)> {
        self.local(l).map(|[i, j, k]| {
            let idx = self.linear(i, j, k);
            (self.values[idx], self.weights[idx])
        })
    }

    /// Grows the grid (copying contents) so it covers lattice box `[lo, hi]` inclusive.
    pub fn ensure_covers(&mut self, lo: [i64; 3], hi: [i64; 3]) {
        if self.is_empty() {
            let dims = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1).max(1) as usize);
            *self = VoxelGrid::new(self.resolution, lo, dims, self.default_value);
            return;
        }
        let cur_hi = [0, 1, 2].map(|a| self.offset[a] + self.dims[a] as i64 - 1);
        let new_lo = [0, 1, 2].map(|a| lo[a].min(self.offset[a]));
        let new_hi = [0, 1, 2].map(|a| hi[a].max(cur_hi[a]));
        if new_lo == self.offset && new_hi == cur_hi {
            return;
        }
        let dims = [0, 1, 2].map(|a| (new_hi[a] - new_lo[a] + 1) as usize);
        let mut grown = VoxelGrid::new(self.resolution, new_lo, dims, self.default_value);
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let src = self.linear(i, j, k);
                    let [gi, gj, gk] = [
                        (self.offset[0] - new_lo[0]) as usize + i,
                        (self.offset[1] - new_lo[1]) as usize + j,
                        (self.offset[2] - new_lo[2]) as usize + k,
                    ];
                    let dst = grown.linear(gi, gj, gk);
                    grown.values[dst] = self.values[src];
                    grown.weights[dst] = self.weights[src];
                }
            }
        }
        *self = grown;
    }

    /// Trilinear interpolation of stored values at a world point; unobserved
    /// voxels contribute their default value. `None` if any of the eight
    /// neighbouring voxel centers is outside the grid.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> Option<f64> {
        let mut base = [0i64; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let u = p[a] / self.resolution - 0.5;
            let f = u.floor();
            base[a] = f as i64;
            frac[a] = u - f;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let d = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let l = [0, 1, 2].map(|a| base[a] + d[a] as i64);
            let (v, _) = self.get_lattice(l)?;
            let mut wt = 1.0;
            for a in 0..3 {
                wt *= if d[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            acc += wt * v;
        }
        Some(acc)
    }
}

/// 2D scalar grid over the world `(x, y)` plane; values sit at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub resolution: f64,
    pub offset: [i64; 2],
    pub dims: [usize; 2],
    pub values: Vec<f64>,
}

/// Extent and resolution of a 2D grid, without values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: f64,
    pub offset: [i64; 2],
    pub dims: [usize; 2],
}

impl GridSpec {
    /// Smallest lattice-aligned grid covering `[min, max]`.
    pub fn covering(min: [f64; 2], max: [f64; 2], resolution: f64) -> Self {
        // Tolerate representation error for bounds that sit on cell edges.
        let lo = [0, 1].map(|a| (min[a] / resolution + 1e-9).floor() as i64);
        let hi = [0, 1].map(|a| {
            let h = (max[a] / resolution - 1e-9).ceil() as i64;
            h.max(lo[a] + 1)
        });
        Self {
            resolution,
            offset: lo,
            dims: [(hi[0] - lo[0]) as usize, (hi[1] - lo[1]) as usize],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            (self.offset[0] + ix as i64) as f64 * self.resolution + 0.5 * self.resolution,
            (self.offset[1] + iy as i64) as f64 * self.resolution + 0.5 * self.resolution,
        ]
    }

    pub fn min_corner(&self) -> [f64; 2] {
        [
            self.offset[0] as f64 * self.resolution,
            self.offset[1] as f64 * self.resolution,
        ]
    }

    pub fn max_corner(&self) -> [f64; 2] {
        [
            (self.offset[0] + self.dims[0] as i64) as f64 * self.resolution,
            (self.offset[1] + self.dims[1] as i64) as f64 * self.resolution,
        ]
    }
}

impl Grid2 {
    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Self {
            resolution: spec.resolution,
            offset: spec.offset,
            dims: spec.dims,
            values: vec![value; spec.cell_count()],
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            resolution: self.resolution,
            offset: self.offset,
            dims: self.dims,
        }
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.dims[0] + ix
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let i = self.index(ix, iy);
        self.values[i] = v;
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        self.spec().center(ix, iy)
    }

    /// Bilinear interpolation of cell-center values. Coordinates beyond the
    /// outermost centers clamp to the edge; the flag reports whether clamping happened.
    pub fn bilinear(&self, x: f64, y: f64) -> (f64, bool) {
        let mut clamped = false;
        let mut base = [0usize; 2];
        let mut frac = [0f64; 2];
        for (a, c) in [x, y].into_iter().enumerate() {
            let u = c / self.resolution - 0.5 - self.offset[a] as f64;
            let max_u = (self.dims[a] - 1) as f64;
            let uc = if u < 0.0 {
                clamped = true;
                0.0
            } else if u > max_u {
                clamped = true;
                max_u
            } else {
                u
            };
            let f = uc.floor().min((self.dims[a].saturating_sub(2)) as f64);
            base[a] = f as usize;
            frac[a] = uc - f;
        }
        let [i0, j0] = base;
        let i1 = (i0 + 1).min(self.dims[0] - 1);
        let j1 = (j0 + 1).min(self.dims[1] - 1);
        let [fx, fy] = frac;
        let v = (1.0 - fx) * (1.0 - fy) * self.get(i0, j0)
            + fx * (1.0 - fy) * self.get(i1, j0)
            + (1.0 - fx) * fy * self.get(i0, j1)
            + fx * fy * self.get(i1, j1);
        (v, clamped)
    }
}
