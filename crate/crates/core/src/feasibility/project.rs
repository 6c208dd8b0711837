//! Projection layers: violation descent (VP), box clipping (PC) and the exact
//! penalized Euclidean projection (CP).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::polyhedron::Polyhedron;
use crate::error::{Result, StowError};

/// Element-wise `max(Ax - b, 0)`.
pub fn violation(x: &[f64], ph: &Polyhedron) -> Vec<f64> {
    ph.violation(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpParams {
    pub eta: f64,
    pub epochs: usize,
    pub delta: f64,
}

impl Default for VpParams {
    fn default() -> Self {
        Self {
            eta: 0.010,
            epochs: 273,
            delta: 0.024,
        }
    }
}

impl VpParams {
    /// Fine-tuned variant.
    pub fn star() -> Self {
        Self {
            eta: 0.01,
            epochs: 300,
            delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Total violation before the first and after every iteration.
    pub totals: Vec<f64>,
}

/// Gradient descent on the squared violation: `x <- max(x - eta A^T V(x), 0)`.
///
/// Coordinates outside `support` are held at zero. In inference mode the loop
/// stops once an iteration lowers the total violation by at most `delta`.
pub fn vp_project(
    x: &[f64],
    ph: &Polyhedron,
    params: VpParams,
    inference: bool,
    support: Option<&[bool]>,
) -> Result<VpOutcome> {
    if !(params.eta > 0.0) || params.epochs == 0 {
        return Err(StowError::Contract("vp needs eta > 0 and epochs >= 1".into()));
    }
    let on = |i: usize| support.map_or(true, |s| s[i]);
    let mut cur: Vec<f64> = x.iter().enumerate().map(|(i, &v)| if on(i) { v } else { 0.0 }).collect();
    let mut v = ph.violation(&cur);
    let mut totals = vec![v.iter().sum::<f64>()];
    let mut iterations = 0;
    for it in 0..params.epochs {
        let g = ph.at_mul(&v);
        for i in 0..cur.len() {
            if on(i) {
                cur[i] = (cur[i] - params.eta * g[i]).max(0.0);
            }
        }
        if let Some(i) = cur.iter().position(|c| !c.is_finite()) {
            return Err(StowError::Numerical {
                iteration: it,
                detail: format!("vp produced a non-finite coordinate {i}"),
            });
        }
        iterations = it + 1;
        v = ph.violation(&cur);
        let total: f64 = v.iter().sum();
        let prev = *totals.last().unwrap();
        totals.push(total);
        if inference && prev - total <= params.delta {
            break;
        }
    }
    Ok(VpOutcome {
        x: cur,
        iterations,
        totals,
    })
}

/// `max(min(x, ub), lb)` element-wise.
pub fn clip_box(x: &[f64], lb: &[f64], ub: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lb.iter().zip(ub))
        .map(|(&v, (&l, &u))| v.min(u).max(l))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpParams {
    pub lambda: f64,
    /// Floor negative right-hand sides of hard rows at zero so that `x = 0`
    /// stays feasible after a bad upstream action.
    pub clamp_hard_rhs: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CpParams {
    fn default() -> Self {
        Self {
            lambda: 1e4,
            clamp_hard_rhs: true,
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpOutcome {
    pub x: Vec<f64>,
    /// Slack used by each soft row (zero for hard rows).
    pub slack: Vec<f64>,
    pub kkt: f64,
    pub max_hard_residual: f64,
    pub iterations: usize,
}

/// Dual of the projection, with the primal solved in closed form.
///
/// Single-coefficient hard rows and `x >= 0` become bounds; the remaining hard
/// rows take multipliers in `[0, inf)` and soft rows in `[0, lambda/2]`
/// (the objective is halved). The dual is maximized by exact coordinate ascent,
/// an exact step along each sweep's net direction, and projected Newton steps.
struct Dual {
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cap: Vec<f64>,
    /// Polyhedron row of each dual row.
    source: Vec<usize>,
}

impl Dual {
    fn z(&self, mu: &[f64]) -> Vec<f64> {
        let mut z = self.x.clone();
        for (r, &m) in self.rows.iter().zip(mu) {
            if m != 0.0 {
                for (zj, a) in z.iter_mut().zip(r) {
                    *zj -= m * a;
                }
            }
        }
        z
    }

    fn primal(&self, mu: &[f64]) -> Vec<f64> {
        self.z(mu)
            .iter()
            .enumerate()
            .map(|(j, &v)| v.max(self.lo[j]).min(self.hi[j]))
            .collect()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, h)| r.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() - h)
            .collect()
    }

    fn value(&self, mu: &[f64]) -> f64 {
        let y = self.primal(mu);
        let g = self.grad(&y);
        0.5 * y.iter().zip(&self.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            + mu.iter().zip(&g).map(|(m, gi)| m * gi).sum::<f64>()
    }

    fn projected_grad(&self, mu: &[f64], g: &[f64]) -> f64 {
        mu.iter()
            .zip(g)
            .zip(&self.cap)
            .map(|((&m, &gi), &c)| {
                let stepped = (m + gi).max(0.0).min(c);
                (stepped - m).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest maximizer in `[0, t_hi]` of the dual along a line, given the
    /// unclipped primal `z0` at `t = 0` and `w = B^T d`. The derivative
    /// `w . clip(z0 - t w) - c` is piecewise linear and non-increasing.
    fn line_max(&self, z0: &[f64], w: &[f64], c: f64, t_hi: f64) -> f64 {
        let deriv = |t: f64| -> f64 {
            w.iter()
                .enumerate()
                .filter(|(_, &wj)| wj != 0.0)
                .map(|(j, &wj)| wj * (z0[j] - t * wj).max(self.lo[j]).min(self.hi[j]))
                .sum::<f64>()
                - c
        };
        if deriv(0.0) <= 0.0 {
            return 0.0;
        }
        if t_hi.is_finite() && deriv(t_hi) >= 0.0 {
            return t_hi;
        }
        let mut bps: Vec<f64> = Vec::new();
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for bound in [self.lo[j], self.hi[j]] {
                    if bound.is_finite() {
                        let t = (z0[j] - bound) / wj;
                        if t > 0.0 && t < t_hi {
                            bps.push(t);
                        }
                    }
                }
            }
        }
        bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
        bps.dedup();
        let mut left = 0.0;
        let mut d_left = deriv(left);
        for &bp in bps.iter().chain(std::iter::once(&t_hi)) {
            let right = if bp.is_finite() { bp } else { left + 1.0 + left.abs() };
            let d_right = deriv(right);
            if d_right <= 0.0 {
                return if d_left == d_right {
                    left
                } else {
                    left + (right - left) * d_left / (d_left - d_right)
                };
            }
            if !bp.is_finite() {
                // constant slope past the last breakpoint
                let slope = d_right - d_left;
                return if slope < 0.0 { right - d_right / slope } else { f64::INFINITY };
            }
            left = right;
            d_left = d_right;
        }
        t_hi
    }

    fn coordinate(&self, mu: &mut [f64], i: usize) {
        let a = &self.rows[i];
        let mut z = self.z(mu);
        for (zj, aj) in z.iter_mut().zip(a) {
            *zj += mu[i] * aj;
        }
        mu[i] = self.line_max(&z, a, self.rhs[i], self.cap[i]);
    }

    /// Exact step along `d` from `mu`, truncated at the multiplier box.
    fn pattern(&self, mu: &mut [f64], d: &[f64]) {
        let mut t_hi = f64::INFINITY;
        for ((&m, &di), &c) in mu.iter().zip(d).zip(&self.cap) {
            if di > 0.0 {
                t_hi = t_hi.min((c - m) / di);
            } else if di < 0.0 {
                t_hi = t_hi.min(m / -di);
            }
        }
        if !(t_hi > 0.0) {
            return;
        }
        let mut w = vec![0.0; self.x.len()];
        let mut c = 0.0;
        for ((row, &di), &h) in self.rows.iter().zip(d).zip(&self.rhs) {
            if di != 0.0 {
                c += di * h;
                for (wj, a) in w.iter_mut().zip(row) {
                    *wj += di * a;
                }
            }
        }
        let t = self.line_max(&self.z(mu), &w, c, t_hi);
        if t.is_finite() && t > 0.0 {
            for ((m, &di), &cap) in mu.iter_mut().zip(d).zip(&self.cap) {
                *m = (*m + t * di).max(0.0).min(cap);
            }
        }
    }

    /// Newton step on the free multipliers; returns true when it improved the dual.
    fn newton(&self, mu: &mut [f64]) -> bool {
        let y = self.primal(mu);
        let g = self.grad(&y);
        let z = self.z(mu);
        let eps = 1e-14;
        let free_dual: Vec<usize> = (0..mu.len())
            .filter(|&i| {
                let at_lo = mu[i] <= eps && g[i] <= 0.0;
                let at_hi = mu[i] >= self.cap[i] - eps && g[i] >= 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let free_primal: Vec<usize> = (0..z.len())
            .filter(|&j| z[j] > self.lo[j] && z[j] < self.hi[j])
            .collect();
        if free_dual.is_empty() || free_primal.is_empty() {
            return false;
        }
        let bw = DMatrix::from_fn(free_dual.len(), free_primal.len(), |r, c| {
            self.rows[free_dual[r]][free_primal[c]]
        });
        let h = &bw * bw.transpose();
        let rhs = DVector::from_iterator(free_dual.len(), free_dual.iter().map(|&i| g[i]));
        let Ok(d) = h.svd(true, true).solve(&rhs, 1e-12) else {
            return false;
        };
        let base = self.value(mu);
        let mut t = 1.0;
        for _ in 0..30 {
            let mut trial = mu.to_vec();
            for (r, &i) in free_dual.iter().enumerate() {
                trial[i] = (mu[i] + t * d[r]).max(0.0).min(self.cap[i]);
            }
            if self.value(&trial) > base + 1e-15 * base.abs().max(1.0) {
                mu.copy_from_slice(&trial);
                return true;
            }
            t *= 0.5;
        }
        false
    }
}

/// Penalized Euclidean projection onto `ph` restricted to `support`.
///
/// Minimizes `||y - x||^2 + lambda * ||eps||_1` subject to the hard rows,
/// `y >= 0`, `y = 0` off the support, and `a_i y <= b_i + eps_i` on soft rows.
pub fn cp_project(
    x: &[f64],
    ph: &Polyhedron,
    params: CpParams,
    support: Option<&[bool]>,
) -> Result<CpOutcome> {
    if !(params.lambda > 0.0) {
        return Err(StowError::Contract("cp needs lambda > 0".into()));
    }
    let n = ph.n;
    let on = |i: usize| support.map_or(true, |s| s[i]);
    let mut lo: Vec<f64> = vec![0.0; n];
    let mut hi: Vec<f64> = (0..n).map(|j| if on(j) { f64::INFINITY } else { 0.0 }).collect();
    let mut dual = Dual {
        x: x.to_vec(),
        lo: Vec::new(),
        hi: Vec::new(),
        rows: Vec::new(),
        rhs: Vec::new(),
        cap: Vec::new(),
        source: Vec::new(),
    };
    for i in 0..ph.m() {
        let row = ph.row(i);
        let mut rhs = ph.b[i];
        if !ph.soft[i] && params.clamp_hard_rhs {
            rhs = rhs.max(0.0);
        }
        let nz: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0 && on(j)).collect();
        if !ph.soft[i] && nz.len() == 1 {
            let j = nz[0];
            let bound = rhs / row[j];
            if row[j] > 0.0 {
                hi[j] = hi[j].min(bound);
            } else {
                lo[j] = lo[j].max(bound);
            }
            continue;
        }
        if nz.is_empty() {
            continue;
        }
        let masked_row: Vec<f64> = (0..n).map(|j| if on(j) { row[j] } else { 0.0 }).collect();
        dual.rows.push(masked_row);
        dual.rhs.push(rhs);
        dual.cap.push(if ph.soft[i] { params.lambda / 2.0 } else { f64::INFINITY });
        dual.source.push(i);
    }
    if (0..n).any(|j| lo[j] > hi[j] + 1e-12) {
        return Err(StowError::Solver("cp: empty box from hard rows".into()));
    }
    for j in 0..n {
        hi[j] = hi[j].max(lo[j]);
    }
    dual.lo = lo;
    dual.hi = hi;

    let r = dual.rows.len();
    let mut mu = vec![0.0; r];
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let y = dual.primal(&mu);
        let g = dual.grad(&y);
        kkt = dual.projected_grad(&mu, &g);
        if kkt <= params.tol {
            break;
        }
        let before = mu.clone();
        for i in 0..r {
            dual.coordinate(&mut mu, i);
        }
        let d: Vec<f64> = mu.iter().zip(&before).map(|(a, b)| a - b).collect();
        dual.pattern(&mut mu, &d);
        dual.newton(&mut mu);
        if mu.iter().any(|m| !m.is_finite() || m.abs() > 1e15) {
            return Err(StowError::Numerical {
                iteration: it,
                detail: format!("cp multipliers diverged; hard rows may be infeasible (kkt {kkt:e})"),
            });
        }
    }
    let y = dual.primal(&mu);
    let g = dual.grad(&y);
    kkt = kkt.min(dual.projected_grad(&mu, &g));
    if kkt > 1e-8 {
        return Err(StowError::Numerical {
            iteration: iterations,
            detail: format!("cp did not converge, kkt residual {kkt:e}"),
        });
    }
    let mut slack = vec![0.0; ph.m()];
    for (d, &src) in dual.source.iter().enumerate() {
        if ph.soft[src] {
            slack[src] = g[d].max(0.0);
        }
    }
    let mut max_hard: f64 = 0.0;
    for i in 0..ph.m() {
        if !ph.soft[i] {
            let mut rhs = ph.b[i];
            if params.clamp_hard_rhs {
                rhs = rhs.max(0.0);
            }
            max_hard = max_hard.max(ph.row_dot(i, &y) - rhs);
        }
    }
    Ok(CpOutcome {
        x: y,
        slack,
        kkt,
        max_hard_residual: max_hard,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::polyhedron::RowLabel;

    fn single(a: f64, b: f64) -> Polyhedron {
        let mut ph = Polyhedron::new(1);
        ph.push(&[a], b, RowLabel::Demand);
        ph
    }

    #[test]
    fn scalar_violation() {
        assert_eq!(violation(&[2.0], &single(1.0, 0.0)), vec![2.0]);
        assert_eq!(violation(&[-1.0], &single(1.0, 0.0)), vec![0.0]);
    }

    #[test]
    fn vp_single_step() {
        let p = VpParams {
            eta: 0.5,
            epochs: 1,
            delta: 0.0,
        };
        let out = vp_project(&[1.0], &single(1.0, 0.0), p, false, None).unwrap();
        assert_eq!(out.x, vec![0.5]);
    }

    #[test]
    fn vp_fixed_point() {
        let mut ph = Polyhedron::new(2);
        ph.push(&[1.0, 1.0], 3.0, RowLabel::Demand);
        let out = vp_project(&[1.0, 1.5], &ph, VpParams::default(), false, None).unwrap();
        assert_eq!(out.x, vec![1.0, 1.5]);
    }

    #[test]
    fn vp_defaults() {
        let d = VpParams::default();
        assert_eq!((d.eta, d.epochs, d.delta), (0.010, 273, 0.024));
        let s = VpParams::star();
        assert_eq!((s.eta, s.epochs, s.delta), (0.01, 300, 0.01));
    }

    #[test]
    fn vp_holds_masked_coordinates() {
        let mut ph = Polyhedron::new(2);
        ph.push(&[-1.0, -1.0], -2.0, RowLabel::LcgLb);
        let out = vp_project(&[0.0, 0.0], &ph, VpParams::default(), false, Some(&[true, false])).unwrap();
        assert_eq!(out.x[1], 0.0);
        assert!(out.x[0] > 0.0);
    }

    #[test]
    fn clip_cases() {
        assert_eq!(clip_box(&[5.0], &[0.0], &[3.0]), vec![3.0]);
        assert_eq!(clip_box(&[1.0, -2.0], &[0.0, 0.0], &[3.0, 3.0]), vec![1.0, 0.0]);
        let once = clip_box(&[4.0, -1.0, 0.5], &[0.0; 3], &[1.0; 3]);
        assert_eq!(clip_box(&once, &[0.0; 3], &[1.0; 3]), once);
    }

    #[test]
    fn cp_half_space_toy() {
        let mut ph = Polyhedron::new(2);
        ph.push(&[1.0, 1.0], 1.0, RowLabel::Demand);
        let out = cp_project(&[1.0, 1.0], &ph, CpParams::default(), None).unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-12 && (out.x[1] - 0.5).abs() < 1e-12);
        assert!(out.kkt <= 1e-8);
    }

    #[test]
    fn cp_identity_on_feasible() {
        let mut ph = Polyhedron::new(3);
        ph.push(&[1.0, 1.0, 1.0], 5.0, RowLabel::Demand);
        ph.push(&[2.0, 0.0, 0.0], 4.0, RowLabel::Capacity);
        ph.push(&[0.3, -0.2, 0.1], 1.0, RowLabel::LcgLb);
        let x = [1.0, 0.5, 2.0];
        let out = cp_project(&x, &ph, CpParams::default(), None).unwrap();
        for (a, b) in out.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cp_soft_rows_yield_to_cheap_penalty() {
        // soft row x <= 0 with a tiny penalty: stay near x
        let mut ph = Polyhedron::new(1);
        ph.push(&[1.0], 0.0, RowLabel::LcgUb);
        let p = CpParams {
            lambda: 1.0,
            ..CpParams::default()
        };
        let out = cp_project(&[3.0], &ph, p, None).unwrap();
        // minimize (y-3)^2 + y  ->  y = 2.5
        assert!((out.x[0] - 2.5).abs() < 1e-10);
        assert!((out.slack[0] - 2.5).abs() < 1e-10);
        let hard = cp_project(&[3.0], &ph, CpParams::default(), None).unwrap();
        assert!(hard.x[0].abs() < 1e-10);
    }
}
