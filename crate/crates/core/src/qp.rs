//! Dense primal-dual interior-point solver for small convex QPs.
//!
//! Solves `min 1/2 z'Hz + q'z` subject to `A z = b` and `G z <= h` with
//! Mehrotra's predictor-corrector method. Constraint rows are stored sparsely.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse constraint row as `(column, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

fn dot_row(row: &SparseRow, z: &[f64]) -> f64 {
    row.iter().map(|(j, a)| a * z[*j]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    /// Rows of `G z <= h`.
    pub ineq_rows: Vec<SparseRow>,
    pub ineq_rhs: Vec<f64>,
}

impl QpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            hessian: DMatrix::zeros(num_vars, num_vars),
            linear: DVector::zeros(num_vars),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    /// Adds `row . z <= rhs`.
    pub fn add_le(&mut self, row: SparseRow, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    /// Adds `row . z >= rhs`.
    pub fn add_ge(&mut self, row: SparseRow, rhs: f64) {
        self.add_le(row.into_iter().map(|(j, a)| (j, -a)).collect(), -rhs);
    }

    /// Adds `lo <= z[j] <= hi`.
    pub fn add_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.add_le(vec![(j, 1.0)], hi);
        self.add_le(vec![(j, -1.0)], -lo);
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        0.5 * zv.dot(&(&self.hessian * &zv)) + self.linear.dot(&zv)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.hessian.shape() != (n, n) {
            return Err(Error::InvalidParameter("QP Hessian shape mismatch".into()));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.ineq_rows.len() != self.ineq_rhs.len() {
            return Err(Error::InvalidParameter("QP row/rhs count mismatch".into()));
        }
        let rows_ok = self
            .eq_rows
            .iter()
            .chain(&self.ineq_rows)
            .flatten()
            .all(|(j, a)| *j < n && a.is_finite());
        if !rows_ok {
            return Err(Error::InvalidParameter("QP row has bad column or coefficient".into()));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.linear.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().chain(&self.ineq_rhs).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("QP data"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Residual target for normal termination.
    pub tolerance: f64,
    /// Residual level still accepted as solved when the iteration cap is hit.
    pub acceptable_tolerance: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-9,
            acceptable_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    /// Iteration cap reached without meeting the acceptable tolerance.
    Degraded,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Degraded => "degraded",
        }
    }
}

/// Infinity norms of the KKT conditions at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_feasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub eq_duals: Vec<f64>,
    /// Nonnegative multipliers of the `G z <= h` rows.
    pub ineq_duals: Vec<f64>,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// KKT residuals of a primal-dual point, recomputed from scratch.
pub fn kkt_residuals(p: &QpProblem, z: &[f64], y: &[f64], lambda: &[f64]) -> KktResiduals {
    let zv = DVector::from_column_slice(z);
    let mut grad = &p.hessian * &zv + &p.linear;
    for (row, yi) in p.eq_rows.iter().zip(y) {
        for (j, a) in row {
            grad[*j] += a * yi;
        }
    }
    for (row, li) in p.ineq_rows.iter().zip(lambda) {
        for (j, a) in row {
            grad[*j] += a * li;
        }
    }
    let mut primal = 0.0f64;
    for (row, b) in p.eq_rows.iter().zip(&p.eq_rhs) {
        primal = primal.max((dot_row(row, z) - b).abs());
    }
    let mut comp = 0.0f64;
    for ((row, h), li) in p.ineq_rows.iter().zip(&p.ineq_rhs).zip(lambda) {
        let slack = h - dot_row(row, z);
        primal = primal.max((-slack).max(0.0));
        comp = comp.max((slack * li).abs()).max((-li).max(0.0));
    }
    KktResiduals {
        stationarity: grad.amax(),
        primal_feasibility: primal,
        complementarity: comp,
    }
}

/// Largest step in `(0, 1]` keeping `v + a * dv` nonnegative.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

/// `[H + G' diag(d) G, A'; A, 0]`, lightly regularized against
/// rank-deficient equality rows.
fn reduced_kkt(p: &QpProblem, d: &[f64]) -> DMatrix<f64> {
    let n = p.num_vars();
    let me = p.eq_rows.len();
    let dim = n + me;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(&p.hessian);
    for (row, di) in p.ineq_rows.iter().zip(d) {
        for (a, va) in row {
            for (b, vb) in row {
                k[(*a, *b)] += di * va * vb;
            }
        }
    }
    for (r, row) in p.eq_rows.iter().enumerate() {
        for (j, a) in row {
            k[(n + r, *j)] += a;
            k[(*j, n + r)] += a;
        }
    }
    for i in 0..n {
        k[(i, i)] += 1e-12;
    }
    for i in n..dim {
        k[(i, i)] -= 1e-12;
    }
    k
}

/// Best iterate seen so far: KKT score, z, y, λ.
type Scored = (f64, Vec<f64>, Vec<f64>, Vec<f64>);
/// Newton direction: dz, dy, ds, dλ.
type Direction = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

pub fn solve_qp(p: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let me = p.eq_rows.len();
    let mi = p.ineq_rows.len();

    // Start from the minimizer of the objective plus a quadratic penalty on
    // inequality violation, with slacks and multipliers shifted positive.
    let mut z;
    let mut y;
    let mut s;
    let mut lam;
    {
        let ones = vec![1.0; mi];
        let k = reduced_kkt(p, &ones);
        let mut rhs = DVector::zeros(n + me);
        for i in 0..n {
            rhs[i] = -p.linear[i];
        }
        for (row, h) in p.ineq_rows.iter().zip(&p.ineq_rhs) {
            for (j, a) in row {
                rhs[*j] += a * h;
            }
        }
        for r in 0..me {
            rhs[n + r] = p.eq_rhs[r];
        }
        let sol = k
            .lu()
            .solve(&rhs)
            .filter(|v| v.iter().all(|x| x.is_finite()))
            .unwrap_or_else(|| DVector::zeros(n + me));
        z = sol.rows(0, n).iter().copied().collect::<Vec<f64>>();
        y = sol.rows(n, me).iter().copied().collect::<Vec<f64>>();
        let resid: Vec<f64> = p.ineq_rows.iter().zip(&p.ineq_rhs).map(|(r, h)| h - dot_row(r, &z)).collect();
        let shift = |v: Vec<f64>| -> Vec<f64> {
            let lowest = v.iter().copied().fold(f64::INFINITY, f64::min);
            let add = if lowest < 1.0 { 1.0 - lowest } else { 0.0 };
            v.into_iter().map(|x| x + add).collect()
        };
        lam = shift(resid.iter().map(|r| -r).collect());
        s = shift(resid);
    }

    let mut best: Option<Scored> = None;
    let mut iterations = 0;
    let mut converged = false;

    for it in 0..=settings.max_iterations {
        iterations = it;
        // Residuals with the solver's own slack variables.
        let zv = DVector::from_column_slice(&z);
        let mut rd = &p.hessian * &zv + &p.linear;
        for (row, yi) in p.eq_rows.iter().zip(&y) {
            for (j, a) in row {
                rd[*j] += a * yi;
            }
        }
        for (row, li) in p.ineq_rows.iter().zip(&lam) {
            for (j, a) in row {
                rd[*j] += a * li;
            }
        }
        let re: Vec<f64> = p.eq_rows.iter().zip(&p.eq_rhs).map(|(r, b)| dot_row(r, &z) - b).collect();
        let ri: Vec<f64> = p
            .ineq_rows
            .iter()
            .zip(&p.ineq_rhs)
            .zip(&s)
            .map(|((r, h), si)| dot_row(r, &z) + si - h)
            .collect();
        let mu = if mi > 0 {
            s.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>() / mi as f64
        } else {
            0.0
        };

        let res = kkt_residuals(p, &z, &y, &lam);
        let score = res.max();
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, z.clone(), y.clone(), lam.clone()));
        }
        if score <= settings.tolerance {
            converged = true;
            break;
        }
        if it == settings.max_iterations {
            break;
        }

        let d: Vec<f64> = lam.iter().zip(&s).map(|(l, si)| l / si).collect();
        let dim = n + me;
        let k = reduced_kkt(p, &d);
        let lu = k.lu();

        let solve_dir = |rc: &[f64]| -> Option<Direction> {
            let mut rhs = DVector::zeros(dim);
            for i in 0..n {
                rhs[i] = -rd[i];
            }
            for ((row, ((si, li), rii)), rci) in p.ineq_rows.iter().zip(s.iter().zip(&lam).zip(&ri)).zip(rc) {
                let w = (rci - li * rii) / si;
                for (j, a) in row {
                    rhs[*j] += a * w;
                }
            }
            for r in 0..me {
                rhs[n + r] = -re[r];
            }
            let sol = lu.solve(&rhs)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dz: Vec<f64> = sol.rows(0, n).iter().copied().collect();
            let dy: Vec<f64> = sol.rows(n, me).iter().copied().collect();
            let mut ds = vec![0.0; mi];
            let mut dl = vec![0.0; mi];
            for i in 0..mi {
                let gdz = dot_row(&p.ineq_rows[i], &dz);
                ds[i] = -ri[i] - gdz;
                dl[i] = (-rc[i] - lam[i] * ds[i]) / s[i];
            }
            Some((dz, dy, ds, dl))
        };

        // Predictor.
        let rc_aff: Vec<f64> = s.iter().zip(&lam).map(|(a, b)| a * b).collect();
        let Some((_, _, ds_a, dl_a)) = solve_dir(&rc_aff) else { break };
        let a_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
        let sigma = if mi > 0 && mu > 0.0 {
            let mu_aff = s
                .iter()
                .zip(&ds_a)
                .zip(lam.iter().zip(&dl_a))
                .map(|((si, dsi), (li, dli))| (si + a_aff * dsi) * (li + a_aff * dli))
                .sum::<f64>()
                / mi as f64;
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Corrector.
        let rc: Vec<f64> = (0..mi)
            .map(|i| s[i] * lam[i] + ds_a[i] * dl_a[i] - sigma * mu)
            .collect();
        let Some((dz, dy, ds, dl)) = solve_dir(&rc) else { break };
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
        for i in 0..n {
            z[i] += alpha * dz[i];
        }
        for i in 0..me {
            y[i] += alpha * dy[i];
        }
        for i in 0..mi {
            s[i] = (s[i] + alpha * ds[i]).max(1e-300);
            lam[i] = (lam[i] + alpha * dl[i]).max(1e-300);
        }
    }

    let (score, z, y, lam) = best.expect("at least one iterate is scored");
    let residuals = kkt_residuals(p, &z, &y, &lam);
    let status = if converged || score <= settings.acceptable_tolerance {
        SolveStatus::Solved
    } else {
        SolveStatus::Degraded
    };
    Ok(QpSolution {
        objective: p.objective(&z),
        z,
        eq_duals: y,
        ineq_duals: lam,
        residuals,
        iterations,
        status,
    })
}
