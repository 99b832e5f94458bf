//! Receding-horizon tracking controller with discrete CBF constraints,
//! linearized about the previous prediction and solved as a QP.

use serde::{Deserialize, Serialize};

use crate::cbf::CbfField;
use crate::error::{Error, Result};
use crate::qp::{solve_qp, KktResiduals, QpProblem, QpSettings, SolveStatus};
use crate::state::{step_dynamics, wrap_angle, ControlInput, RobotState};

pub type Mat3 = [[f64; 3]; 3];

fn diag(d: [f64; 3]) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerParams {
    pub horizon: usize,
    pub dt: f64,
    pub gamma_bar: f64,
    pub q: Mat3,
    pub r: Mat3,
    pub p: Mat3,
    pub v_max: f64,
    pub omega_max: f64,
    /// Position box `[[x_min, y_min], [x_max, y_max]]` for predicted states;
    /// scenarios fill it from their workspace.
    #[serde(skip)]
    pub workspace: [[f64; 2]; 2],
    pub slack_penalty: f64,
    /// Small positive offset on the softened barrier rows; absorbs the
    /// curvature the linearization cannot see when `gamma_bar` is near 1.
    pub cbf_margin: f64,
    /// Margin of the hard state constraints used by the classic baseline.
    pub classic_epsilon: f64,
    pub solver: QpSettings,
}

impl Default for ControllerParams {
    fn default() -> Self {
        let q = [1.0, 1.0, 0.1];
        Self {
            horizon: 10,
            dt: 0.2,
            gamma_bar: 0.03,
            q: diag(q),
            r: diag([0.1; 3]),
            p: diag(q.map(|v| 10.0 * v)),
            v_max: 0.5,
            omega_max: 1.0,
            workspace: [[0.0, 0.0], [6.4, 6.4]],
            slack_penalty: 1e4,
            cbf_margin: 1e-3,
            classic_epsilon: 1e-3,
            solver: QpSettings::default(),
        }
    }
}

fn check_symmetric_psd(name: &str, m: &Mat3, strict: bool) -> Result<()> {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    if mat.iter().any(|v| !v.is_finite()) || (mat - mat.transpose()).amax() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{name} must be finite and symmetric")));
    }
    let min_eig = mat.symmetric_eigenvalues().min();
    if min_eig < -1e-12 || (strict && min_eig <= 0.0) {
        let kind = if strict { "positive definite" } else { "positive semidefinite" };
        return Err(Error::InvalidParameter(format!("{name} must be {kind}")));
    }
    Ok(())
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("controller.horizon must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter("controller.dt must be positive".into()));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "controller.gamma_bar must lie in (0, 1], got {}",
                self.gamma_bar
            )));
        }
        check_symmetric_psd("controller.q", &self.q, false)?;
        check_symmetric_psd("controller.r", &self.r, true)?;
        check_symmetric_psd("controller.p", &self.p, false)?;
        for (name, v) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("slack_penalty", self.slack_penalty),
            ("classic_epsilon", self.classic_epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("controller.{name} must be positive")));
            }
        }
        if !(self.cbf_margin.is_finite() && self.cbf_margin >= 0.0) {
            return Err(Error::InvalidParameter("controller.cbf_margin must be non-negative".into()));
        }
        let [lo, hi] = self.workspace;
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidParameter("controller.workspace is empty".into()));
        }
        Ok(())
    }

    pub fn contains(&self, s: &RobotState) -> bool {
        let [lo, hi] = self.workspace;
        s.x >= lo[0] && s.x <= hi[0] && s.y >= lo[1] && s.y <= hi[1]
    }
}

/// How the barrier enters the QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierConstraint {
    /// Softened discrete CBF rows `C dx + D du + c + xi >= 0` for k = 0..T-1.
    DiscreteCbf,
    /// Hard rows `h(x_op) + grad h . dx >= epsilon` on every predicted state, no slack.
    HardState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    pub states: Vec<RobotState>,
    pub inputs: Vec<ControlInput>,
    pub slacks: Vec<f64>,
    pub status: SolveStatus,
}

impl PredictedTrajectory {
    /// All states at `x`, all inputs zero.
    pub fn hold(x: RobotState, horizon: usize) -> Self {
        Self {
            states: vec![x; horizon + 1],
            inputs: vec![ControlInput::ZERO; horizon],
            slacks: vec![0.0; horizon],
            status: SolveStatus::Solved,
        }
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    /// Previous prediction advanced one step, padded with its last state and a zero input.
    pub fn shifted(&self) -> (Vec<RobotState>, Vec<ControlInput>) {
        let t = self.horizon();
        let last = *self.states.last().expect("trajectory has states");
        let states = (0..=t).map(|k| *self.states.get(k + 1).unwrap_or(&last)).collect();
        let inputs = (0..t)
            .map(|k| *self.inputs.get(k + 1).unwrap_or(&ControlInput::ZERO))
            .collect();
        (states, inputs)
    }
}

/// Affine form `C dx + D du + c >= 0` of the discrete condition
/// `h(x+) - h(x) >= -gamma_bar * h(x)` about an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfRow {
    pub c_x: [f64; 3],
    pub d_u: [f64; 3],
    pub c: f64,
}

pub fn linearize_cbf_constraint(
    field: &CbfField,
    x_op: &RobotState,
    u_op: &ControlInput,
    dt: f64,
    gamma_bar: f64,
) -> Result<CbfRow> {
    if !(x_op.is_finite() && u_op.is_finite()) {
        return Err(Error::NonFinite("CBF operating point"));
    }
    let xp = [x_op.x + dt * u_op.vx, x_op.y + dt * u_op.vy];
    let (h0, _) = field.query_h(x_op.x, x_op.y)?;
    let (g0, _) = field.query_grad(x_op.x, x_op.y)?;
    let (h1, _) = field.query_h(xp[0], xp[1])?;
    let (g1, _) = field.query_grad(xp[0], xp[1])?;
    let k = 1.0 - gamma_bar;
    Ok(CbfRow {
        c_x: [g1[0] - k * g0[0], g1[1] - k * g0[1], 0.0],
        d_u: [dt * g1[0], dt * g1[1], 0.0],
        c: h1 - k * h0,
    })
}

/// Decision-vector layout: `dx_0..dx_T`, `du_0..du_{T-1}`, then one slack per CBF row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpLayout {
    pub horizon: usize,
    pub slacks: bool,
}

impl QpLayout {
    pub fn dx(&self, k: usize) -> usize {
        3 * k
    }
    pub fn du(&self, k: usize) -> usize {
        3 * (self.horizon + 1) + 3 * k
    }
    pub fn xi(&self, k: usize) -> usize {
        6 * self.horizon + 3 + k
    }
    pub fn num_vars(&self) -> usize {
        6 * self.horizon + 3 + if self.slacks { self.horizon } else { 0 }
    }
}

/// QP together with the trajectory it was linearized about.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub qp: QpProblem,
    pub layout: QpLayout,
    pub x_op: Vec<RobotState>,
    pub u_op: Vec<ControlInput>,
    /// Barrier rows as built, for k = 0..T-1 (empty for the hard-state variant).
    pub cbf_rows: Vec<CbfRow>,
}

fn state_error(a: &RobotState, b: &RobotState) -> [f64; 3] {
    [a.x - b.x, a.y - b.y, wrap_angle(a.theta - b.theta)]
}

fn add_quadratic(qp: &mut QpProblem, base: usize, w: &Mat3, offset: [f64; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            qp.hessian[(base + i, base + j)] += 2.0 * w[i][j];
            qp.linear[base + i] += 2.0 * w[i][j] * offset[j];
        }
    }
}

pub fn build_qp(
    params: &ControllerParams,
    x_t: &RobotState,
    prev: &PredictedTrajectory,
    field: &CbfField,
    goal: &RobotState,
    barrier: BarrierConstraint,
) -> Result<MpcProblem> {
    let t = params.horizon;
    if prev.horizon() != t || prev.states.len() != t + 1 {
        return Err(Error::InvalidParameter(format!(
            "previous trajectory horizon {} does not match controller horizon {t}",
            prev.horizon()
        )));
    }
    if !x_t.is_finite() || !goal.is_finite() {
        return Err(Error::NonFinite("MPC state or goal"));
    }
    let (x_op, u_op) = prev.shifted();
    let layout = QpLayout {
        horizon: t,
        slacks: barrier == BarrierConstraint::DiscreteCbf,
    };
    let mut qp = QpProblem::new(layout.num_vars());

    // Tracking cost about the operating trajectory.
    for k in 0..=t {
        let w = if k == t { &params.p } else { &params.q };
        add_quadratic(&mut qp, layout.dx(k), w, state_error(&x_op[k], goal));
    }
    for k in 0..t {
        add_quadratic(&mut qp, layout.du(k), &params.r, u_op[k].to_array());
    }

    // Initial condition and integrator dynamics in deviation form.
    let e0 = state_error(x_t, &x_op[0]);
    for a in 0..3 {
        qp.add_eq(vec![(layout.dx(0) + a, 1.0)], e0[a]);
    }
    for k in 0..t {
        let pred = step_dynamics(x_op[k], u_op[k], params.dt)?;
        let r = state_error(&pred, &x_op[k + 1]);
        for a in 0..3 {
            qp.add_eq(
                vec![
                    (layout.dx(k + 1) + a, 1.0),
                    (layout.dx(k) + a, -1.0),
                    (layout.du(k) + a, -params.dt),
                ],
                r[a],
            );
        }
    }

    // Input box and workspace box.
    let limits = [params.v_max, params.v_max, params.omega_max];
    for k in 0..t {
        let u = u_op[k].to_array();
        for a in 0..3 {
            qp.add_bounds(layout.du(k) + a, -limits[a] - u[a], limits[a] - u[a]);
        }
    }
    let [lo, hi] = params.workspace;
    for k in 1..=t {
        let p = [x_op[k].x, x_op[k].y];
        for a in 0..2 {
            qp.add_bounds(layout.dx(k) + a, lo[a] - p[a], hi[a] - p[a]);
        }
    }

    let mut cbf_rows = Vec::new();
    match barrier {
        BarrierConstraint::DiscreteCbf => {
            for k in 0..t {
                let row = linearize_cbf_constraint(field, &x_op[k], &u_op[k], params.dt, params.gamma_bar)?;
                let mut coeffs = vec![(layout.xi(k), 1.0)];
                for a in 0..2 {
                    coeffs.push((layout.dx(k) + a, row.c_x[a]));
                    coeffs.push((layout.du(k) + a, row.d_u[a]));
                }
                qp.add_ge(coeffs, params.cbf_margin - row.c);
                qp.add_ge(vec![(layout.xi(k), 1.0)], 0.0);
                qp.linear[layout.xi(k)] += params.slack_penalty;
                cbf_rows.push(row);
            }
        }
        BarrierConstraint::HardState => {
            // The current state is fixed; constraining it only manufactures
            // infeasibility.
            for k in 1..=t {
                let (h, _) = field.query_h(x_op[k].x, x_op[k].y)?;
                let (g, _) = field.query_grad(x_op[k].x, x_op[k].y)?;
                qp.add_ge(
                    vec![(layout.dx(k), g[0]), (layout.dx(k) + 1, g[1])],
                    params.classic_epsilon - h,
                );
            }
        }
    }

    Ok(MpcProblem {
        qp,
        layout,
        x_op,
        u_op,
        cbf_rows,
    })
}

/// Per-tick solver report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub max_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    pub input: ControlInput,
    pub trajectory: PredictedTrajectory,
    pub report: MpcReport,
    pub problem: MpcProblem,
    /// Raw QP decision vector.
    pub solution: Vec<f64>,
}

/// One receding-horizon step with softened discrete CBF rows.
pub fn mpc_step(
    params: &ControllerParams,
    x_t: &RobotState,
    prev: &PredictedTrajectory,
    field: &CbfField,
    goal: &RobotState,
) -> Result<MpcOutput> {
    controller_step(params, x_t, prev, field, goal, BarrierConstraint::DiscreteCbf)
}

/// One step of the classic baseline: hard linearized state constraints, no slack.
pub fn classic_mpc_step(
    params: &ControllerParams,
    x_t: &RobotState,
    prev: &PredictedTrajectory,
    field: &CbfField,
    goal: &RobotState,
) -> Result<MpcOutput> {
    controller_step(params, x_t, prev, field, goal, BarrierConstraint::HardState)
}

pub fn controller_step(
    params: &ControllerParams,
    x_t: &RobotState,
    prev: &PredictedTrajectory,
    field: &CbfField,
    goal: &RobotState,
    barrier: BarrierConstraint,
) -> Result<MpcOutput> {
    let problem = build_qp(params, x_t, prev, field, goal, barrier)?;
    let sol = solve_qp(&problem.qp, &params.solver)?;
    let layout = problem.layout;
    let t = params.horizon;

    let inputs: Vec<ControlInput> = match sol.status {
        SolveStatus::Solved => (0..t)
            .map(|k| {
                let i = layout.du(k);
                let u = problem.u_op[k].to_array();
                // The box holds to solver tolerance; snap onto it exactly.
                ControlInput::new(u[0] + sol.z[i], u[1] + sol.z[i + 1], u[2] + sol.z[i + 2])
                    .clamped(params.v_max, params.omega_max)
            })
            .collect(),
        // Keep following the previous plan.
        SolveStatus::Degraded => problem
            .u_op
            .iter()
            .map(|u| u.clamped(params.v_max, params.omega_max))
            .collect(),
    };
    let slacks: Vec<f64> = if layout.slacks && sol.status == SolveStatus::Solved {
        (0..t).map(|k| sol.z[layout.xi(k)].max(0.0)).collect()
    } else {
        vec![0.0; t]
    };
    let mut states = Vec::with_capacity(t + 1);
    states.push(*x_t);
    for k in 0..t {
        states.push(step_dynamics(states[k], inputs[k], params.dt)?);
    }
    let max_slack = slacks.iter().copied().fold(0.0, f64::max);
    let report = MpcReport {
        status: sol.status,
        iterations: sol.iterations,
        objective: sol.objective,
        residuals: sol.residuals,
        max_slack,
    };
    Ok(MpcOutput {
        input: inputs[0],
        trajectory: PredictedTrajectory {
            states,
            inputs,
            slacks,
            status: sol.status,
        },
        report,
        problem,
        solution: sol.z,
    })
}
