use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::contour::{contour_segments, Segment};
use super::metrics::compute_metrics;
use super::pipeline::RunRecord;
use crate::cbf::CbfField;
use crate::error::{Error, Result};
use crate::sim::{Stationarity, WorldObject};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("{other:?}")),
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 10] =
    ["t", "x", "y", "theta", "vx", "vy", "omega", "h", "solver_status", "max_slack"];

/// Per-tick trajectory with one `obj<k>_ev` column per object id ever mapped.
pub fn write_trajectory_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let ids = record.object_ids();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(ids.iter().map(|id| format!("obj{id}_ev")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &record.rows {
        let p = r.true_pose;
        let u = r.input;
        let mut line = vec![
            r.t.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.theta.to_string(),
            u.vx.to_string(),
            u.vy.to_string(),
            u.omega.to_string(),
            r.h.to_string(),
            r.status.as_str().to_string(),
            r.max_slack.to_string(),
        ];
        for id in &ids {
            let ev = r.objects.iter().find(|o| o.id == *id);
            line.push(ev.map(|o| o.expected_consistency.to_string()).unwrap_or_default());
        }
        w.write_record(&line).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format belief trace: `t,id,ev,mu,sigma`.
pub fn write_consistency_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "id", "ev", "mu", "sigma"]).map_err(csv_err)?;
    for r in &record.rows {
        for o in &r.objects {
            w.write_record([
                r.t.to_string(),
                o.id.to_string(),
                o.expected_consistency.to_string(),
                o.mu.to_string(),
                o.sigma.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Barrier grid as `ix,iy,x,y,h` rows, x fastest.
pub fn write_field_csv<W: Write>(field: &CbfField, out: W) -> Result<()> {
    let g = &field.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ix", "iy", "x", "y", "h"]).map_err(csv_err)?;
    for iy in 0..g.dims[1] {
        for ix in 0..g.dims[0] {
            let c = g.center(ix, iy);
            w.write_record([
                ix.to_string(),
                iy.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                g.get(ix, iy).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

const PX_PER_M: f64 = 100.0;

struct Canvas {
    min: [f64; 2],
    max: [f64; 2],
}

impl Canvas {
    fn pt(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.min[0]) * PX_PER_M, (self.max[1] - p[1]) * PX_PER_M)
    }

    fn size(&self) -> (f64, f64) {
        ((self.max[0] - self.min[0]) * PX_PER_M, (self.max[1] - self.min[1]) * PX_PER_M)
    }
}

fn footprint(c: &Canvas, o: &WorldObject, style: &str, out: &mut String) {
    let pts: Vec<String> = o
        .footprint_corners()
        .iter()
        .map(|p| {
            let (x, y) = c.pt(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    out.push_str(&format!(
        "  <polygon points=\"{}\" {style}><title>object {}</title></polygon>\n",
        pts.join(" "),
        o.id
    ));
}

fn contour_path(c: &Canvas, segs: &[Segment], style: &str, out: &mut String) {
    if segs.is_empty() {
        return;
    }
    let mut d = String::new();
    for [a, b] in segs {
        let (ax, ay) = c.pt(*a);
        let (bx, by) = c.pt(*b);
        d.push_str(&format!("M{ax:.2} {ay:.2}L{bx:.2} {by:.2}"));
    }
    out.push_str(&format!("  <path d=\"{d}\" fill=\"none\" {style}/>\n"));
}

/// Top-down view: object footprints, `h = 0` and `h = theta_cutoff` contours
/// of the final barrier, and the driven path.
pub fn render_svg(record: &RunRecord) -> String {
    let spec = record.final_field.grid.spec();
    let canvas = Canvas {
        min: spec.min_corner(),
        max: spec.max_corner(),
    };
    let (w, h) = canvas.size();
    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n"
    );
    s.push_str(&format!(
        "  <title>{} ({}, gamma_bar = {})</title>\n",
        escape(&record.scenario),
        record.mode,
        record.gamma_bar
    ));
    s.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\" stroke=\"black\"/>\n");

    for o in &record.initial_world {
        if record.final_world.iter().all(|f| f != o) {
            footprint(&canvas, o, "fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\"", &mut s);
        }
    }
    for o in &record.final_world {
        let fill = match o.stationarity {
            Stationarity::LikelyStatic => "#607d8b",
            Stationarity::LikelyDynamic => "#c17d11",
        };
        footprint(&canvas, o, &format!("fill=\"{fill}\" stroke=\"black\""), &mut s);
    }

    let grid = &record.final_field.grid;
    let cutoff = record.final_field.params.theta_cutoff;
    contour_path(&canvas, &contour_segments(grid, cutoff), "stroke=\"orange\" stroke-width=\"1.5\"", &mut s);
    contour_path(&canvas, &contour_segments(grid, 0.0), "stroke=\"deeppink\" stroke-width=\"2\"", &mut s);

    let mut pts: Vec<String> = record
        .rows
        .iter()
        .map(|r| r.true_pose.position())
        .chain(std::iter::once(record.final_pose.position()))
        .map(|p| {
            let (x, y) = canvas.pt(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    pts.dedup();
    s.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"royalblue\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));
    let (gx, gy) = canvas.pt(record.goal.position());
    s.push_str(&format!(
        "  <circle cx=\"{gx:.2}\" cy=\"{gy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"green\" stroke-width=\"2\"/>\n",
        record.goal_tolerance * PX_PER_M
    ));
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes all artifacts of a run into `out_dir`; returns the written paths.
pub fn emit_outputs(record: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let path = out_dir.join("trajectory.csv");
    write_trajectory_csv(record, create(&path)?)?;
    written.push(path);

    let path = out_dir.join("consistency.csv");
    write_consistency_csv(record, create(&path)?)?;
    written.push(path);

    let path = out_dir.join("metrics.toml");
    fs::write(&path, compute_metrics(record).to_toml())?;
    written.push(path);

    for (tick, field) in &record.field_snapshots {
        let path = out_dir.join(format!("field_{tick:04}.csv"));
        write_field_csv(field, create(&path)?)?;
        written.push(path);
    }
    for (tick, tsdf) in &record.tsdf_snapshots {
        let path = out_dir.join(format!("tsdf_{tick:04}.bin"));
        let mut f = create(&path)?;
        tsdf.write_binary(&mut f)?;
        f.flush()?;
        written.push(path);
    }

    let path = out_dir.join("run.svg");
    fs::write(&path, render_svg(record))?;
    written.push(path);
    Ok(written)
}
