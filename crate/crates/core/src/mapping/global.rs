use std::io::{self, BufRead, Write};

use super::{MapParams, ObjectRecord};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, VoxelGrid};

/// Joint scene TSDF: per-voxel minimum over objects, with the attaining object.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTsdf {
    /// Weights are 1 where some object observed the voxel, else 0.
    pub grid: VoxelGrid,
    pub owner: Vec<Option<u32>>,
    pub truncation: f64,
}

impl GlobalTsdf {
    /// All-unobserved grid covering the workspace footprint up to `z_max`.
    pub fn empty(workspace: GridSpec, params: &MapParams) -> Self {
        let dims = [workspace.dims[0], workspace.dims[1], params.z_levels() as usize];
        let grid = VoxelGrid::new(
            params.resolution,
            [workspace.offset[0], workspace.offset[1], 0],
            dims,
            params.truncation,
        );
        let n = grid.len();
        Self {
            grid,
            owner: vec![None; n],
            truncation: params.truncation,
        }
    }

    /// Writes the snapshot as a text header followed by little-endian `f32`
    /// values and `i32` owners (`-1` for none), x fastest then y then z.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        let o = self.grid.origin();
        let [nx, ny, nz] = self.grid.dims;
        writeln!(out, "OBJCBF-TSDF 1")?;
        writeln!(out, "origin {} {} {}", o[0], o[1], o[2])?;
        writeln!(out, "resolution {}", self.grid.resolution)?;
        writeln!(out, "dims {nx} {ny} {nz}")?;
        writeln!(out, "truncation {}", self.truncation)?;
        writeln!(out, "end_header")?;
        for v in &self.grid.values {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
        for owner in &self.owner {
            let id = owner.map_or(-1, |id| id as i32);
            out.write_all(&id.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads back a snapshot produced by [`GlobalTsdf::write_binary`].
    pub fn read_binary<R: BufRead>(mut input: R) -> Result<Self> {
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::InvalidParameter("truncated TSDF header".into()));
            }
            let line = line.trim_end().to_string();
            if line == "end_header" {
                break;
            }
            header.push(line);
        }
        let field = |key: &str| -> Result<Vec<f64>> {
            header
                .iter()
                .find_map(|l| l.strip_prefix(key).map(str::trim))
                .ok_or_else(|| Error::InvalidParameter(format!("missing `{key}` in TSDF header")))?
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::InvalidParameter(e.to_string())))
                .collect()
        };
        if header.first().map(String::as_str) != Some("OBJCBF-TSDF 1") {
            return Err(Error::InvalidParameter("not an OBJCBF-TSDF 1 file".into()));
        }
        let origin = field("origin")?;
        let res = field("resolution")?[0];
        let dims: Vec<usize> = field("dims")?.iter().map(|d| *d as usize).collect();
        let truncation = field("truncation")?[0];
        let offset = [0, 1, 2].map(|a| (origin[a] / res).round() as i64);
        let mut grid = VoxelGrid::new(res, offset, [dims[0], dims[1], dims[2]], truncation);
        let n = grid.len();
        let mut buf = [0u8; 4];
        for v in grid.values.iter_mut() {
            input.read_exact(&mut buf)?;
            *v = f32::from_le_bytes(buf) as f64;
        }
        let mut owner = Vec::with_capacity(n);
        for w in grid.weights.iter_mut() {
            input.read_exact(&mut buf)?;
            let id = i32::from_le_bytes(buf);
            owner.push((id >= 0).then_some(id as u32));
            *w = if id >= 0 { 1.0 } else { 0.0 };
        }
        Ok(Self {
            grid,
            owner,
            truncation,
        })
    }
}

/// Overlays the object TSDFs by taking the minimum at each voxel.
///
/// Voxels an object never observed contribute `+tau`. Ties go to the lowest
/// object id, so the result does not depend on library order.
pub fn fuse_global_tsdf<'a>(
    library: impl IntoIterator<Item = &'a ObjectRecord>,
    workspace: GridSpec,
    params: &MapParams,
) -> GlobalTsdf {
    let mut global = GlobalTsdf::empty(workspace, params);
    let mut objects: Vec<&ObjectRecord> = library.into_iter().collect();
    objects.sort_by_key(|o| o.id);
    let g = &mut global.grid;
    for obj in objects {
        let t = &obj.tsdf;
        if t.is_empty() {
            continue;
        }
        // Overlap of the object box with the global box, in lattice coordinates.
        let lo = [0, 1, 2].map(|a| t.offset[a].max(g.offset[a]));
        let hi = [0, 1, 2].map(|a| {
            (t.offset[a] + t.dims[a] as i64).min(g.offset[a] + g.dims[a] as i64)
        });
        if (0..3).any(|a| lo[a] >= hi[a]) {
            continue;
        }
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let src = t.linear(
                        (i - t.offset[0]) as usize,
                        (j - t.offset[1]) as usize,
                        (k - t.offset[2]) as usize,
                    );
                    if t.weights[src] <= 0.0 {
                        continue;
                    }
                    let v = t.values[src];
                    let dst = g.linear(
                        (i - g.offset[0]) as usize,
                        (j - g.offset[1]) as usize,
                        (k - g.offset[2]) as usize,
                    );
                    let cur = g.values[dst];
                    if v < cur || (v == cur && global.owner[dst].is_none()) {
                        g.values[dst] = v;
                        g.weights[dst] = 1.0;
                        global.owner[dst] = Some(obj.id);
                    }
                }
            }
        }
    }
    global
}
