//! Dense bounded-variable primal simplex.
//!
//! Rows become `A x + s = b` with slack bounds chosen by the row sense. Phase 1
//! minimizes the artificials added to rows whose slack starts out of bounds;
//! phase 2 maximizes the objective. Nonbasic variables sit at a bound (or at 0
//! when free). The final basis is refactored with an LU decomposition to report
//! primal and dual residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `max c.x` subject to `A x (sense) b`, `lb <= x <= ub`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub n: usize,
    pub m: usize,
    /// Row-major `m x n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sense: Vec<Sense>,
    pub c: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers of the maximization.
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 100,
        }
    }
}

impl LpProblem {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            m: 0,
            a: Vec::new(),
            b: Vec::new(),
            sense: Vec::new(),
            c: vec![0.0; n],
            lb: vec![0.0; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    pub fn add_row(&mut self, row: &[f64], sense: Sense, rhs: f64) {
        assert_eq!(row.len(), self.n);
        self.a.extend_from_slice(row);
        self.b.push(rhs);
        self.sense.push(sense);
        self.m += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            worst = worst.max(self.lb[j] - x[j]).max(x[j] - self.ub[j]);
        }
        for i in 0..self.m {
            let lhs: f64 = self.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            let r = lhs - self.b[i];
            worst = worst.max(match self.sense[i] {
                Sense::Le => r,
                Sense::Ge => -r,
                Sense::Eq => r.abs(),
            });
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
    Zero,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// `B^-1 [A | I | art]`, row-major `m x cols`.
    t: Vec<f64>,
    /// Original extended matrix, kept for refactoring.
    a_ext: Vec<f64>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<At>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        self.d = d;
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |r, c| self.a_ext[r * self.cols + self.basis[c]])
    }

    /// Rebuilds `B^-1 A` and the basic values from the original matrix.
    fn refactor(&mut self) -> Result<()> {
        if self.m == 0 {
            return Ok(());
        }
        let lu = self.basis_matrix().lu();
        let a = DMatrix::from_row_slice(self.m, self.cols, &self.a_ext);
        let t = lu.solve(&a).ok_or_else(|| StowError::Numerical {
            iteration: self.iterations,
            detail: "singular basis during refactorization".into(),
        })?;
        for i in 0..self.m {
            for j in 0..self.cols {
                self.t[i * self.cols + j] = t[(i, j)];
            }
        }
        let mut rhs = DVector::from_column_slice(&self.b);
        for j in 0..self.cols {
            if self.state[j] != At::Basic && self.x[j] != 0.0 {
                for i in 0..self.m {
                    rhs[i] -= self.a_ext[i * self.cols + j] * self.x[j];
                }
            }
        }
        let xb = lu.solve(&rhs).unwrap();
        for i in 0..self.m {
            self.x[self.basis[i]] = xb[i];
        }
        self.reduced_costs();
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        for j in 0..cols {
            self.t[r * cols + j] /= p;
        }
        let prow: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.m {
            if i != r {
                let f = self.t[i * cols + q];
                if f != 0.0 {
                    let row = &mut self.t[i * cols..(i + 1) * cols];
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, pv) in self.d.iter_mut().zip(&prow) {
                *dj -= f * pv;
            }
        }
        self.basis[r] = q;
    }

    /// Minimizes `cost . x` from the current basis.
    fn run(&mut self, opts: &SimplexOptions) -> Result<Outcome> {
        self.reduced_costs();
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= opts.max_iter {
                return Err(StowError::Numerical {
                    iteration: self.iterations,
                    detail: format!("simplex iteration limit, basis size {}", self.m),
                });
            }
            let bland = degenerate > 50;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.cols {
                let dj = self.d[j];
                let dir = match self.state[j] {
                    At::Basic => continue,
                    At::Lower if dj < -opts.opt_tol && self.ub[j] > self.lb[j] => 1.0,
                    At::Upper if dj > opts.opt_tol && self.ub[j] > self.lb[j] => -1.0,
                    At::Zero if dj.abs() > opts.opt_tol => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if enter.map_or(true, |(e, _)| dj.abs() > self.d[e].abs()) {
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                return Ok(Outcome::Optimal);
            };
            // ratio test
            let mut theta = self.ub[q] - self.lb[q];
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let alpha = self.at(i, q) * dir;
                if alpha.abs() <= opts.pivot_tol {
                    continue;
                }
                let bv = self.basis[i];
                let lim = if alpha > 0.0 {
                    if self.lb[bv] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[bv] - self.lb[bv]) / alpha).max(0.0)
                } else {
                    if self.ub[bv] == f64::INFINITY {
                        continue;
                    }
                    ((self.ub[bv] - self.x[bv]) / -alpha).max(0.0)
                };
                let better = match leave {
                    None => lim < theta,
                    Some((li, _)) => {
                        if lim < theta - 1e-12 {
                            true
                        } else if lim <= theta + 1e-12 {
                            if bland {
                                bv < self.basis[li]
                            } else {
                                alpha.abs() > (self.at(li, q) * dir).abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, if alpha > 0.0 { self.lb[bv] } else { self.ub[bv] }));
                    theta = lim;
                }
            }
            if theta == f64::INFINITY {
                return Ok(Outcome::Unbounded);
            }
            self.iterations += 1;
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
            // move
            if theta != 0.0 {
                self.x[q] += dir * theta;
                for i in 0..self.m {
                    let a = self.at(i, q);
                    if a != 0.0 {
                        let bv = self.basis[i];
                        self.x[bv] -= dir * theta * a;
                    }
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { At::Upper } else { At::Lower };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.pivot(r, q);
                    self.state[q] = At::Basic;
                    self.x[out] = bound;
                    self.state[out] = if bound == self.lb[out] { At::Lower } else { At::Upper };
                    since_refactor += 1;
                    if since_refactor >= opts.refactor_every {
                        self.refactor()?;
                        since_refactor = 0;
                    }
                }
            }
        }
    }
}

/// Solves `p` to optimality or reports infeasibility / unboundedness.
pub fn solve_lp(p: &LpProblem, opts: &SimplexOptions) -> Result<LpResult> {
    let (n, m) = (p.n, p.m);
    for j in 0..n {
        if p.lb[j] > p.ub[j] || p.lb[j].is_nan() || p.ub[j].is_nan() || p.c[j].is_nan() {
            return Ok(infeasible(p));
        }
    }
    if p.a.iter().chain(&p.b).any(|v| !v.is_finite()) {
        return Err(StowError::Contract("lp has non-finite coefficients".into()));
    }
    // starting values of structurals
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            if p.lb[j].is_finite() {
                p.lb[j]
            } else if p.ub[j].is_finite() {
                p.ub[j]
            } else {
                0.0
            }
        })
        .collect();
    let mut state: Vec<At> = (0..n)
        .map(|j| {
            if p.lb[j].is_finite() {
                At::Lower
            } else if p.ub[j].is_finite() {
                At::Upper
            } else {
                At::Zero
            }
        })
        .collect();
    let mut lb = p.lb.clone();
    let mut ub = p.ub.clone();
    // slacks
    let mut art_rows = Vec::new();
    let mut slack_vals = vec![0.0; m];
    for i in 0..m {
        let (sl, su) = match p.sense[i] {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        lb.push(sl);
        ub.push(su);
        let lhs: f64 = p.row(i).iter().zip(&x).map(|(a, v)| a * v).sum();
        let s = p.b[i] - lhs;
        slack_vals[i] = s;
        if s < sl - opts.feas_tol || s > su + opts.feas_tol {
            art_rows.push(i);
        }
    }
    let n_art = art_rows.len();
    let cols = n + m + n_art;
    let mut a_ext = vec![0.0; m * cols];
    for i in 0..m {
        a_ext[i * cols..i * cols + n].copy_from_slice(p.row(i));
        a_ext[i * cols + n + i] = 1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    x.extend(slack_vals.iter().copied());
    state.extend(std::iter::repeat(At::Basic).take(m));
    for (a, &i) in art_rows.iter().enumerate() {
        let col = n + m + a;
        let s = slack_vals[i];
        let (sl, su) = (lb[n + i], ub[n + i]);
        let target = if s < sl { sl } else { su };
        let resid = s - target;
        // row: A x + s + sign * art = b, art = |resid|
        a_ext[i * cols + col] = resid.signum();
        x[n + i] = target;
        state[n + i] = if target == sl { At::Lower } else { At::Upper };
        basis[i] = col;
        x.push(resid.abs());
        state.push(At::Basic);
        lb.push(0.0);
        ub.push(f64::INFINITY);
    }
    // B is diagonal with entries 1 (slack) or sign (artificial)
    let mut t = a_ext.clone();
    for (i, &bv) in basis.iter().enumerate() {
        let piv = a_ext[i * cols + bv];
        if piv != 1.0 {
            for v in &mut t[i * cols..(i + 1) * cols] {
                *v /= piv;
            }
        }
    }
    let mut tab = Tableau {
        m,
        cols,
        t,
        a_ext,
        b: p.b.clone(),
        lb,
        ub,
        x,
        state,
        basis,
        cost: vec![0.0; cols],
        d: vec![0.0; cols],
        iterations: 0,
    };
    if n_art > 0 {
        for a in 0..n_art {
            tab.cost[n + m + a] = 1.0;
        }
        tab.run(opts)?;
        tab.refactor()?;
        tab.run(opts)?;
        let infeas: f64 = (0..n_art).map(|a| tab.x[n + m + a].max(0.0)).sum();
        let scale = 1.0 + p.b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if infeas > 1e-7 * scale {
            return Ok(infeasible(p));
        }
        for a in 0..n_art {
            let col = n + m + a;
            tab.ub[col] = 0.0;
            if tab.state[col] != At::Basic {
                tab.x[col] = 0.0;
                tab.state[col] = At::Lower;
            }
        }
    }
    tab.cost = vec![0.0; cols];
    for j in 0..n {
        tab.cost[j] = -p.c[j];
    }
    let mut outcome = tab.run(opts)?;
    // refactor and polish until the fresh basis agrees
    for _ in 0..3 {
        if matches!(outcome, Outcome::Unbounded) {
            break;
        }
        tab.refactor()?;
        let dual_bad = (0..cols).any(|j| match tab.state[j] {
            At::Lower => tab.d[j] < -opts.opt_tol && tab.ub[j] > tab.lb[j],
            At::Upper => tab.d[j] > opts.opt_tol && tab.ub[j] > tab.lb[j],
            At::Zero => tab.d[j].abs() > opts.opt_tol,
            At::Basic => false,
        });
        let primal_bad = tab
            .basis
            .iter()
            .any(|&bv| tab.x[bv] < tab.lb[bv] - 1e-9 || tab.x[bv] > tab.ub[bv] + 1e-9);
        if !dual_bad && !primal_bad {
            break;
        }
        if primal_bad {
            // clamp drifted basics and let the simplex repair reduced costs
            for &bv in &tab.basis {
                tab.x[bv] = tab.x[bv].max(tab.lb[bv]).min(tab.ub[bv]);
            }
        }
        outcome = tab.run(opts)?;
    }
    if matches!(outcome, Outcome::Unbounded) {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            x: tab.x[..n].to_vec(),
            objective: f64::INFINITY,
            duals: vec![0.0; m],
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: tab.iterations,
        });
    }
    let xs = tab.x[..n].to_vec();
    // duals y solve B^T y = c_B (maximization signs)
    let duals = if m > 0 {
        let bt = tab.basis_matrix().transpose();
        let cb = DVector::from_iterator(m, tab.basis.iter().map(|&bv| if bv < n { p.c[bv] } else { 0.0 }));
        bt.lu().solve(&cb).map(|y| y.iter().copied().collect()).unwrap_or_else(|| vec![0.0; m])
    } else {
        Vec::new()
    };
    let mut dual_residual: f64 = 0.0;
    for j in 0..n + m {
        if tab.state[j] == At::Basic || tab.ub[j] == tab.lb[j] {
            continue;
        }
        let col_dot: f64 = (0..m).map(|i| tab.a_ext[i * cols + j] * duals[i]).sum();
        let cj = if j < n { p.c[j] } else { 0.0 };
        let rc = cj - col_dot;
        // at lower a positive reduced gain means not optimal; at upper a negative one
        let bad = match tab.state[j] {
            At::Lower => rc.max(0.0),
            At::Upper => (-rc).max(0.0),
            At::Zero => rc.abs(),
            At::Basic => 0.0,
        };
        dual_residual = dual_residual.max(bad);
    }
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective: p.objective(&xs),
        primal_residual: p.max_violation(&xs),
        x: xs,
        duals,
        dual_residual,
        iterations: tab.iterations,
    })
}

fn infeasible(p: &LpProblem) -> LpResult {
    LpResult {
        status: LpStatus::Infeasible,
        x: vec![0.0; p.n],
        objective: f64::NEG_INFINITY,
        duals: vec![0.0; p.m],
        primal_residual: f64::INFINITY,
        dual_residual: 0.0,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable() {
        let mut p = LpProblem::new(1);
        p.c[0] = 1.0;
        p.add_row(&[1.0], Sense::Le, 5.0);
        let r = solve_lp(&p, &SimplexOptions::default()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 5.0).abs() < 1e-12);
        assert!((r.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut p = LpProblem::new(2);
        p.c = vec![3.0, 5.0];
        p.add_row(&[1.0, 0.0], Sense::Le, 4.0);
        p.add_row(&[0.0, 2.0], Sense::Le, 12.0);
        p.add_row(&[3.0, 2.0], Sense::Le, 18.0);
        let r = solve_lp(&p, &SimplexOptions::default()).unwrap();
        assert!((r.objective - 36.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 6.0).abs() < 1e-9);
        assert!(r.primal_residual <= 1e-9 && r.dual_residual <= 1e-9);
    }

    #[test]
    fn phase_one_and_equalities() {
        // max -x - y, x + y >= 2, x - y = 0.5
        let mut p = LpProblem::new(2);
        p.c = vec![-1.0, -1.0];
        p.add_row(&[1.0, 1.0], Sense::Ge, 2.0);
        p.add_row(&[1.0, -1.0], Sense::Eq, 0.5);
        let r = solve_lp(&p, &SimplexOptions::default()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.25).abs() < 1e-9 && (r.x[1] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_row(&[1.0], Sense::Ge, 3.0);
        p.add_row(&[1.0], Sense::Le, 2.0);
        assert_eq!(solve_lp(&p, &SimplexOptions::default()).unwrap().status, LpStatus::Infeasible);
        let mut q = LpProblem::new(2);
        q.c = vec![1.0, 0.0];
        q.add_row(&[1.0, -1.0], Sense::Le, 1.0);
        assert_eq!(solve_lp(&q, &SimplexOptions::default()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn upper_bounds_flip() {
        let mut p = LpProblem::new(2);
        p.c = vec![1.0, 1.0];
        p.ub = vec![2.0, 3.0];
        p.add_row(&[1.0, 1.0], Sense::Le, 10.0);
        let r = solve_lp(&p, &SimplexOptions::default()).unwrap();
        assert!((r.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_model() {
        let p = LpProblem::new(3);
        let r = solve_lp(&p, &SimplexOptions::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.x, vec![0.0; 3]);
    }
}
