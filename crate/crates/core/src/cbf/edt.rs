//! Exact Euclidean distance transform (Felzenszwalb and Huttenlocher).

const FAR: f64 = 1e30;

/// Squared distance transform of a 1D sampled function, written into `out`.
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] {
                if k == 0 {
                    // Only reachable when both samples are FAR; keep the newer one.
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance in cells from every cell of an `nx` by `ny` grid
/// (x fastest) to the nearest site. Returns `None` when there are no sites.
pub fn distance_transform(sites: &[bool], nx: usize, ny: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(sites.len(), nx * ny);
    if !sites.iter().any(|s| *s) {
        return None;
    }
    let n = nx.max(ny);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut grid: Vec<f64> = sites.iter().map(|s| if *s { 0.0 } else { FAR }).collect();

    for ix in 0..nx {
        for iy in 0..ny {
            f[iy] = grid[iy * nx + ix];
        }
        dt_1d(&f[..ny], &mut out[..ny], &mut v, &mut z);
        for iy in 0..ny {
            grid[iy * nx + ix] = out[iy];
        }
    }
    for iy in 0..ny {
        let row = &mut grid[iy * nx..(iy + 1) * nx];
        f[..nx].copy_from_slice(row);
        dt_1d(&f[..nx], &mut out[..nx], &mut v, &mut z);
        row.copy_from_slice(&out[..nx]);
    }
    Some(grid.into_iter().map(f64::sqrt).collect())
}
