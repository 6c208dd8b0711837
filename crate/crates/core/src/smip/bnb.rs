//! LP relaxation and depth-first branch and bound over the binary columns.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::LpModel;
use super::simplex::{solve_lp, LpStatus, SimplexOptions};
use crate::error::{Result, StowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time ran out; the best incumbent is returned.
    TimeLimitBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best known upper bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Duration,
    /// Branch on binaries; otherwise only the relaxation is solved.
    pub branch: bool,
    pub int_tol: f64,
    /// Refuse dense problems with more entries than this.
    pub max_dense: usize,
    pub simplex: SimplexOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(3600),
            branch: false,
            int_tol: 1e-6,
            max_dense: 40_000_000,
            simplex: SimplexOptions::default(),
        }
    }
}

/// Residual limit for a reported optimum.
pub const RESIDUAL_TOL: f64 = 1e-7;

pub fn solve(model: &LpModel, opts: &SolveOptions) -> Result<Solution> {
    let (n, m) = (model.n_vars(), model.n_rows());
    let dense = (m.max(1)) * (n + 2 * m);
    if dense > opts.max_dense {
        return Err(StowError::Refused(format!(
            "dense tableau of {m} rows x {} columns exceeds the limit of {} entries",
            n + 2 * m,
            opts.max_dense
        )));
    }
    let start = Instant::now();
    let lb0: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
    let ub0: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
    let binaries = if opts.branch { model.binaries() } else { Vec::new() };

    let mut best: Option<(Vec<f64>, f64, f64, f64)> = None;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut timed_out = false;
    // open nodes: (parent bound, lower, upper)
    let mut stack: Vec<(f64, Vec<f64>, Vec<f64>)> = vec![(f64::INFINITY, lb0, ub0)];
    let mut open_bounds: Vec<f64> = Vec::new();

    while let Some((parent_bound, lb, ub)) = stack.pop() {
        if let Some((_, inc, _, _)) = &best {
            if parent_bound <= inc + 1e-9 * (1.0 + inc.abs()) {
                continue;
            }
        }
        if start.elapsed() > opts.time_limit && best.is_some() {
            timed_out = true;
            open_bounds.push(parent_bound);
            open_bounds.extend(stack.iter().map(|s| s.0));
            break;
        }
        nodes += 1;
        let prob = model.to_problem(Some((&lb, &ub)));
        let r = solve_lp(&prob, &opts.simplex)?;
        lp_iterations += r.iterations;
        match r.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    return Ok(Solution {
                        status: SolveStatus::Unbounded,
                        x: r.x,
                        objective: f64::INFINITY,
                        bound: f64::INFINITY,
                        nodes,
                        lp_iterations,
                        primal_residual: 0.0,
                        dual_residual: 0.0,
                    });
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        if r.primal_residual > RESIDUAL_TOL || r.dual_residual > RESIDUAL_TOL {
            return Err(StowError::Numerical {
                iteration: r.iterations,
                detail: format!(
                    "residuals above tolerance at node {nodes}: primal {:.3e}, dual {:.3e}, {m} rows",
                    r.primal_residual, r.dual_residual
                ),
            });
        }
        if nodes == 1 {
            root_bound = r.objective;
        }
        if let Some((_, inc, _, _)) = &best {
            if r.objective <= inc + 1e-9 * (1.0 + inc.abs()) {
                continue;
            }
        }
        // most fractional binary
        let mut branch_on: Option<(usize, f64)> = None;
        for &j in &binaries {
            let f = r.x[j] - r.x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > opts.int_tol && branch_on.map_or(true, |(_, d)| dist > d) {
                branch_on = Some((j, dist));
            }
        }
        match branch_on {
            None => {
                let mut x = r.x;
                for &j in &binaries {
                    x[j] = x[j].round();
                }
                best = Some((x, r.objective, r.primal_residual, r.dual_residual));
            }
            Some((j, _)) => {
                let v = r.x[j];
                let mut down = (lb.clone(), ub.clone());
                down.1[j] = v.floor();
                let mut up = (lb, ub);
                up.0[j] = v.ceil();
                // explore the nearer side first
                if v - v.floor() >= 0.5 {
                    stack.push((r.objective, down.0, down.1));
                    stack.push((r.objective, up.0, up.1));
                } else {
                    stack.push((r.objective, up.0, up.1));
                    stack.push((r.objective, down.0, down.1));
                }
            }
        }
    }
    let Some((x, objective, pr, dr)) = best else {
        return Ok(Solution {
            status: SolveStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            bound: f64::NEG_INFINITY,
            nodes,
            lp_iterations,
            primal_residual: f64::INFINITY,
            dual_residual: 0.0,
        });
    };
    let bound = if timed_out {
        open_bounds.iter().cloned().fold(objective, f64::max).min(root_bound)
    } else {
        objective
    };
    Ok(Solution {
        status: if timed_out { SolveStatus::TimeLimitBest } else { SolveStatus::Optimal },
        x,
        objective,
        bound,
        nodes,
        lp_iterations,
        primal_residual: pr,
        dual_residual: dr,
    })
}
