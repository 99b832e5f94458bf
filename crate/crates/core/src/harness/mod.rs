//! Scenario files, the closed-loop driver, metrics and run artifacts.

mod contour;
mod metrics;
mod output;
mod pipeline;
mod scenario;

pub use contour::{contour_segments, Segment};
pub use metrics::{compute_metrics, Metrics};
pub use output::{
    emit_outputs, render_svg, write_consistency_csv, write_field_csv, write_trajectory_csv,
    TRAJECTORY_COLUMNS,
};
pub use pipeline::{
    run_closed_loop, ObjectBelief, Perception, RunRecord, Simulation, TickRow, TickTiming,
};
pub use scenario::{load_scenario, Mode, OutputSpec, PoseNoise, RobotSpec, Scenario, Workspace};
