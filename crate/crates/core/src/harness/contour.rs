//! Marching squares over cell-center samples.

use crate::grid::Grid2;

pub type Segment = [[f64; 2]; 2];

/// Line segments of the `level` isoline of the bilinear field through `grid`.
///
/// Samples equal to `level` count as above it. Saddle cells are resolved by
/// the mean of their four corners.
pub fn contour_segments(grid: &Grid2, level: f64) -> Vec<Segment> {
    let [nx, ny] = grid.dims;
    let mut out = Vec::new();
    if nx < 2 || ny < 2 {
        return out;
    }
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            // Corners counter-clockwise from the lower left.
            let pos = [
                grid.center(ix, iy),
                grid.center(ix + 1, iy),
                grid.center(ix + 1, iy + 1),
                grid.center(ix, iy + 1),
            ];
            let val = [
                grid.get(ix, iy),
                grid.get(ix + 1, iy),
                grid.get(ix + 1, iy + 1),
                grid.get(ix, iy + 1),
            ];
            if val.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let above = val.map(|v| v >= level);
            let crossing = |e: usize| -> [f64; 2] {
                let (a, b) = (e, (e + 1) % 4);
                let t = (level - val[a]) / (val[b] - val[a]);
                [
                    pos[a][0] + t * (pos[b][0] - pos[a][0]),
                    pos[a][1] + t * (pos[b][1] - pos[a][1]),
                ]
            };
            let edges: Vec<usize> = (0..4).filter(|e| above[*e] != above[(*e + 1) % 4]).collect();
            match edges.len() {
                2 => out.push([crossing(edges[0]), crossing(edges[1])]),
                4 => {
                    let center_above = val.iter().sum::<f64>() / 4.0 >= level;
                    // Edges e and e+1 share corner e+1; pair edges around the
                    // corners that differ from the center.
                    if above[0] == center_above {
                        out.push([crossing(0), crossing(1)]);
                        out.push([crossing(2), crossing(3)]);
                    } else {
                        out.push([crossing(3), crossing(0)]);
                        out.push([crossing(1), crossing(2)]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}
